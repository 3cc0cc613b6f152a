#!/usr/bin/env python3
"""Regenerates data/web_api_keywords.txt from TypeScript's lib.dom.d.ts."""
import re
import sys
from pathlib import Path

RESERVED = {
    "break", "case", "catch", "class", "const", "continue", "debugger", "default", "delete", "do",
    "else", "export", "extends", "finally", "for", "function", "if", "import", "in", "instanceof",
    "new", "return", "super", "switch", "this", "throw", "try", "typeof", "var", "void", "while",
    "with", "let", "static", "yield", "await", "null", "true", "false", "undefined", "async", "enum",
}

# symbols the trace schema instruments, beyond what the typings expose
EXTRA = [
    "eval", "Function", "OfflineAudioContext", "AudioContext", "RTCPeerConnection",
    "monospace", "serif", "sans-serif", "cursive", "fantasy", "system-ui",
]

member = re.compile(r"^\s+(?:readonly\s+)?([A-Za-z_$][\w$]*)\??\s*[:(<]")
decl = re.compile(r"^(?:declare\s+)?(?:interface|var|function|class)\s+([A-Za-z_$][\w$]*)")


def main(src: Path, out: Path) -> None:
    names = set(EXTRA)
    for line in src.read_text().splitlines():
        m = decl.match(line) or member.match(line)
        if m:
            names.add(m.group(1))
    keep = sorted(n for n in names if len(n) >= 3 and n not in RESERVED)
    header = [
        "# Web API interface, method and property names.",
        "# Generated by scripts/gen_vocab.py from lib.dom.d.ts; names shorter than 3 characters dropped.",
        "# version: " + out.stem + "-1",
    ]
    out.write_text("\n".join(header + keep) + "\n")
    print(f"{len(keep)} keywords", file=sys.stderr)


if __name__ == "__main__":
    main(Path(sys.argv[1]), Path(sys.argv[2]))
