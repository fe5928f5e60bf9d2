#!/usr/bin/env python3
"""Functional checks for record_parser over in-range inputs."""
import sys


def main():
    sys.path.insert(0, sys.argv[1])
    import record_parser

    blob = b"HDR0" + bytes([1, 2, 3, 4])
    checks = [
        ("read_header", record_parser.read_header(blob), b"HDR0"),
        ("read_field(0)", record_parser.read_field(blob, 0), 2),
        ("read_field(1)", record_parser.read_field(blob, 1), 4),
        ("field_count", record_parser.field_count(blob), 2),
        ("field_count(empty)", record_parser.field_count(b""), 0),
    ]
    failures = 0
    for name, got, want in checks:
        if got != want:
            print(f"FAIL {name}: expected {want!r}, got {got!r}")
            failures += 1
        else:
            print(f"ok   {name} -> {got!r}")
    if failures:
        print(f"{failures} functional test(s) failed")
        return 1
    print("all functional tests passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
