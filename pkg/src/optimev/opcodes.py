"""EVM opcode table (Shanghai instruction set) and a linear-sweep disassembler."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

INVALID = "INVALID"

_BASE = {
    0x00: "STOP", 0x01: "ADD", 0x02: "MUL", 0x03: "SUB", 0x04: "DIV", 0x05: "SDIV",
    0x06: "MOD", 0x07: "SMOD", 0x08: "ADDMOD", 0x09: "MULMOD", 0x0A: "EXP", 0x0B: "SIGNEXTEND",
    0x10: "LT", 0x11: "GT", 0x12: "SLT", 0x13: "SGT", 0x14: "EQ", 0x15: "ISZERO",
    0x16: "AND", 0x17: "OR", 0x18: "XOR", 0x19: "NOT", 0x1A: "BYTE", 0x1B: "SHL",
    0x1C: "SHR", 0x1D: "SAR",
    0x20: "KECCAK256",
    0x30: "ADDRESS", 0x31: "BALANCE", 0x32: "ORIGIN", 0x33: "CALLER", 0x34: "CALLVALUE",
    0x35: "CALLDATALOAD", 0x36: "CALLDATASIZE", 0x37: "CALLDATACOPY", 0x38: "CODESIZE",
    0x39: "CODECOPY", 0x3A: "GASPRICE", 0x3B: "EXTCODESIZE", 0x3C: "EXTCODECOPY",
    0x3D: "RETURNDATASIZE", 0x3E: "RETURNDATACOPY", 0x3F: "EXTCODEHASH",
    0x40: "BLOCKHASH", 0x41: "COINBASE", 0x42: "TIMESTAMP", 0x43: "NUMBER",
    0x44: "PREVRANDAO", 0x45: "GASLIMIT", 0x46: "CHAINID", 0x47: "SELFBALANCE", 0x48: "BASEFEE",
    0x50: "POP", 0x51: "MLOAD", 0x52: "MSTORE", 0x53: "MSTORE8", 0x54: "SLOAD", 0x55: "SSTORE",
    0x56: "JUMP", 0x57: "JUMPI", 0x58: "PC", 0x59: "MSIZE", 0x5A: "GAS", 0x5B: "JUMPDEST",
    0x5F: "PUSH0",
    0xF0: "CREATE", 0xF1: "CALL", 0xF2: "CALLCODE", 0xF3: "RETURN", 0xF4: "DELEGATECALL",
    0xF5: "CREATE2", 0xFA: "STATICCALL", 0xFD: "REVERT", 0xFE: INVALID, 0xFF: "SELFDESTRUCT",
}

OPCODES: dict[int, str] = dict(_BASE)
for _i in range(32):
    OPCODES[0x60 + _i] = f"PUSH{_i + 1}"
for _i in range(16):
    OPCODES[0x80 + _i] = f"DUP{_i + 1}"
    OPCODES[0x90 + _i] = f"SWAP{_i + 1}"
for _i in range(5):
    OPCODES[0xA0 + _i] = f"LOG{_i}"

# byte -> mnemonic for all 256 values; unassigned bytes decode as INVALID
MNEMONICS: tuple[str, ...] = tuple(OPCODES.get(b, INVALID) for b in range(256))
VALID_MNEMONICS = frozenset(MNEMONICS)


def operand_size(opcode: int) -> int:
    return opcode - 0x5F if 0x60 <= opcode <= 0x7F else 0


@dataclass(frozen=True)
class Instruction:
    offset: int
    opcode: int
    mnemonic: str
    operand: bytes

    @property
    def size(self) -> int:
        return 1 + len(self.operand)


def iter_instructions(code: bytes) -> Iterator[Instruction]:
    """Linear sweep. A PUSH cut short by the end of code keeps the bytes that remain."""
    pc, n = 0, len(code)
    while pc < n:
        op = code[pc]
        k = operand_size(op)
        operand = code[pc + 1 : pc + 1 + k]
        yield Instruction(pc, op, MNEMONICS[op], bytes(operand))
        pc += 1 + k


def disassemble(code: bytes) -> tuple[str, ...]:
    """Mnemonic stream of ``code`` with operand data dropped."""
    out = []
    pc, n = 0, len(code)
    names = MNEMONICS
    while pc < n:
        op = code[pc]
        out.append(names[op])
        pc += 1 + (op - 0x5F if 0x60 <= op <= 0x7F else 0)
    return tuple(out)
