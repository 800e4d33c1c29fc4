"""Configuration types: accounts, global state, machine state, execution
environments, transaction effects/environments, execution states and
annotated call stacks.

Everything here is treated as an immutable snapshot: mutators return new
objects and share unchanged substructure, which is what makes forking a
configuration (and exception rollback) cheap.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Optional, Union

from .words import Address, Word256

STACK_LIMIT = 1024
CALL_DEPTH_LIMIT = 1024


@dataclass(frozen=True)
class Account:
    nonce: int = 0
    balance: int = 0
    storage: dict = field(default_factory=dict)  # Word256 -> Word256, no zero entries
    code: bytes = b""

    def storage_get(self, key: Word256) -> Word256:
        return self.storage.get(key, 0)

    def storage_set(self, key: Word256, value: Word256) -> "Account":
        stor = dict(self.storage)
        if value == 0:
            stor.pop(key, None)
        else:
            stor[key] = value
        return Account(self.nonce, self.balance, stor, self.code)

    def with_balance(self, balance: int) -> "Account":
        return Account(self.nonce, balance, self.storage, self.code)

    def with_nonce(self, nonce: int) -> "Account":
        return Account(nonce, self.balance, self.storage, self.code)

    def with_code(self, code: bytes) -> "Account":
        return Account(self.nonce, self.balance, self.storage, code)


class GlobalState:
    """Partial map address -> account; absent addresses are nonexistent,
    which is distinct from an all-zero account."""

    __slots__ = ("_accounts",)

    def __init__(self, accounts: Optional[dict] = None):
        self._accounts = accounts if accounts is not None else {}

    def get(self, addr: Address) -> Optional[Account]:
        return self._accounts.get(addr)

    def put(self, addr: Address, acct: Account) -> "GlobalState":
        accounts = dict(self._accounts)
        accounts[addr] = acct
        return GlobalState(accounts)

    def delete(self, addr: Address) -> "GlobalState":
        accounts = dict(self._accounts)
        accounts.pop(addr, None)
        return GlobalState(accounts)

    def addresses(self) -> Iterator[Address]:
        return iter(self._accounts)

    def items(self):
        return self._accounts.items()

    def __contains__(self, addr: Address) -> bool:
        return addr in self._accounts

    def __eq__(self, other) -> bool:
        if not isinstance(other, GlobalState):
            return NotImplemented
        return self._accounts == other._accounts

    def __hash__(self):
        raise TypeError("GlobalState is not hashable")

    def __repr__(self) -> str:
        return f"GlobalState({len(self._accounts)} accounts)"

    def total_balance(self) -> int:
        return sum(a.balance for a in self._accounts.values())


class LogEvent(NamedTuple):
    address: Address
    topics: tuple
    data: bytes


@dataclass(frozen=True)
class TransactionEffects:
    refund: int = 0
    logs: tuple = ()
    suicides: frozenset = frozenset()

    def add_refund(self, amount: int) -> "TransactionEffects":
        if amount == 0:
            return self
        return TransactionEffects(self.refund + amount, self.logs, self.suicides)

    def append_log(self, event: LogEvent) -> "TransactionEffects":
        return TransactionEffects(self.refund, self.logs + (event,), self.suicides)

    def register_suicide(self, addr: Address) -> "TransactionEffects":
        return TransactionEffects(self.refund, self.logs, self.suicides | {addr})


EMPTY_EFFECTS = TransactionEffects()


@dataclass(frozen=True)
class BlockHeader:
    parent: Word256 = 0
    beneficiary: Address = 0
    difficulty: Word256 = 0
    number: Word256 = 0
    gaslimit: Word256 = 0
    timestamp: Word256 = 0


@dataclass(frozen=True)
class TransactionEnvironment:
    origin: Address
    gas_price: Word256
    header: BlockHeader
    # hash -> header chain for BLOCKHASH; empty means no known ancestors
    ancestors: dict = field(default_factory=dict, compare=False)


# accessors a miner or sender controls; used by the env-independence checker
ENV_COMPONENTS = {
    "origin": lambda t: t.origin,
    "gasprice": lambda t: t.gas_price,
    "parent": lambda t: t.header.parent,
    "beneficiary": lambda t: t.header.beneficiary,
    "difficulty": lambda t: t.header.difficulty,
    "number": lambda t: t.header.number,
    "gaslimit": lambda t: t.header.gaslimit,
    "timestamp": lambda t: t.header.timestamp,
}


def env_with_component(tenv: TransactionEnvironment, name: str, value: int) -> TransactionEnvironment:
    if name == "origin":
        return TransactionEnvironment(value, tenv.gas_price, tenv.header, tenv.ancestors)
    if name == "gasprice":
        return TransactionEnvironment(tenv.origin, value, tenv.header, tenv.ancestors)
    h = tenv.header
    fields = {
        "parent": h.parent, "beneficiary": h.beneficiary, "difficulty": h.difficulty,
        "number": h.number, "gaslimit": h.gaslimit, "timestamp": h.timestamp,
    }
    if name not in fields:
        raise KeyError(f"unknown environment component {name!r}")
    fields[name] = value
    return TransactionEnvironment(tenv.origin, tenv.gas_price, BlockHeader(**fields), tenv.ancestors)


def env_equal_up_to(a: TransactionEnvironment, b: TransactionEnvironment, component: str) -> bool:
    return all(fn(a) == fn(b) for name, fn in ENV_COMPONENTS.items() if name != component)


@dataclass(frozen=True)
class ExecutionEnvironment:
    actor: Address
    input: bytes
    sender: Address
    value: Word256
    code: bytes


@dataclass(frozen=True)
class MachineState:
    gas: int
    pc: int
    memory: dict          # Word256 -> byte, no zero entries
    active_words: int
    stack: tuple          # Word256s, top first


def memory_read(memory: dict, offset: int, size: int) -> bytes:
    if size == 0:
        return b""
    return bytes(memory.get(offset + i, 0) for i in range(size))


def memory_write(memory: dict, offset: int, data: bytes) -> dict:
    """Copy-on-write interval update; zero bytes are not stored."""
    if not data:
        return memory
    new = dict(memory)
    for i, byte in enumerate(data):
        if byte:
            new[offset + i] = byte
        else:
            new.pop(offset + i, None)
    return new


# --------------------------------------------------------------------------
# execution states and annotated call stacks


@dataclass(frozen=True)
class Regular:
    mu: MachineState
    iota: ExecutionEnvironment
    sigma: GlobalState
    eta: TransactionEffects


@dataclass(frozen=True)
class Halt:
    sigma: GlobalState
    gas: int
    data: bytes
    eta: TransactionEffects


class ExcState:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "EXC"


EXC = ExcState()

ExecutionState = Union[Regular, Halt, ExcState]

# a contract is (address, code); None annotates initialization-code frames
Contract = tuple


@dataclass(frozen=True)
class Frame:
    state: ExecutionState
    contract: Optional[Contract]


CallStack = tuple  # of Frame, top first


def is_final(stack: CallStack) -> bool:
    return len(stack) == 1 and not isinstance(stack[0].state, Regular)


def validate_stack(stack: CallStack) -> None:
    """Reject stacks violating the grammar: Halt/Exc only on top, length
    bounded by 1024 frames plus one transient halting top."""
    if not stack:
        raise ValueError("empty call stack")
    if len(stack) > CALL_DEPTH_LIMIT + 1:
        raise ValueError(f"call stack longer than {CALL_DEPTH_LIMIT + 1}")
    for frame in stack[1:]:
        if not isinstance(frame.state, Regular):
            raise ValueError("Halt/Exc below the top of a call stack")


def substack(inner: CallStack, outer: CallStack) -> bool:
    """True iff outer = s :: (S' ++ inner) for some state s and list S'."""
    if len(inner) >= len(outer):
        return False
    return outer[len(outer) - len(inner):] == tuple(inner)


def stack_diff(a: CallStack, b: CallStack) -> CallStack:
    """The unique prefix S' with S' ++ b = a when b is a suffix of a, else empty."""
    la, lb = len(a), len(b)
    if lb <= la and tuple(a[la - lb:]) == tuple(b):
        return tuple(a[:la - lb])
    return ()


_COMPONENTS = ("nonce", "balance", "storage", "code")


def state_eq_up_to(a: GlobalState, b: GlobalState, ignore: frozenset | set = frozenset(),
                   at: frozenset | set = frozenset()) -> bool:
    """Equality of global states except possibly the `ignore` components at
    the `at` addresses. Account existence must always agree."""
    unknown = set(ignore) - set(_COMPONENTS)
    if unknown:
        raise ValueError(f"unknown state components: {sorted(unknown)}")
    addrs = set(a.addresses()) | set(b.addresses())
    for addr in addrs:
        aa, ab = a.get(addr), b.get(addr)
        if (aa is None) != (ab is None):
            return False
        if aa is None:
            continue
        skip = ignore if addr in at else frozenset()
        for comp in _COMPONENTS:
            if comp in skip:
                continue
            if getattr(aa, comp) != getattr(ab, comp):
                return False
    return True
