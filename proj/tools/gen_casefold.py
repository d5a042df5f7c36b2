#!/usr/bin/env python3
"""Regenerates src/casefold_table.inc from the running Python's Unicode data.

Each entry maps one codepoint to its full case-fold as a UTF-8 string.
Codepoints that fold to themselves are omitted.
"""

import sys


def cpp_escape(s: str) -> str:
    out = []
    for b in s.encode("utf-8"):
        out.append(f"\\x{b:02x}")
    return "".join(out)


def main() -> None:
    entries = []
    for cp in range(0x110000):
        if 0xD800 <= cp <= 0xDFFF:
            continue
        ch = chr(cp)
        folded = ch.casefold()
        if folded != ch:
            entries.append((cp, folded))

    out = sys.stdout
    out.write("// Generated by tools/gen_casefold.py; do not edit by hand.\n")
    out.write("// One entry per codepoint whose full case-fold differs from itself.\n")
    out.write(f"// {len(entries)} entries, sorted by codepoint.\n")
    for cp, folded in entries:
        out.write(f'{{0x{cp:06X}, "{cpp_escape(folded)}"}},\n')


if __name__ == "__main__":
    main()
