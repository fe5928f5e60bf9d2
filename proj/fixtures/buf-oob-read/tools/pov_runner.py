#!/usr/bin/env python3
"""PoV harness: replays the crashing field index against a record blob."""
import sys


def main():
    workspace, blob_path = sys.argv[1], sys.argv[2]
    sys.path.insert(0, workspace)
    import record_parser

    with open(blob_path, "rb") as f:
        blob = f.read()
    # The fuzzer minimized the crash to a field index far past the blob end.
    for index in (0, 1, 1000):
        try:
            value = record_parser.read_field(blob, index)
            print(f"field {index} -> {value}")
        except Exception as e:  # crash reproduced
            print(f"FuzzerSecurityIssue: OutOfBoundsRead in read_field "
                  f"(index {index}): {type(e).__name__}: {e}")
            return 1
    print("PoV did not reproduce")
    return 0


if __name__ == "__main__":
    sys.exit(main())
