#!/usr/bin/env python3
"""PoV harness: feeds minimized crashing hostnames to validate_host."""
import sys


def main():
    workspace, blob_path = sys.argv[1], sys.argv[2]
    sys.path.insert(0, workspace)
    import host_rules

    with open(blob_path, "r", encoding="utf-8") as f:
        inputs = [line.rstrip("\n") for line in f if line.strip()]
    for host in inputs:
        try:
            verdict = host_rules.validate_host(host)
            print(f"validate_host({host!r}) -> {verdict}")
        except Exception as e:  # crash reproduced
            print(f"FuzzerSecurityIssue: unhandled exception in validate_host"
                  f"({host!r}): {type(e).__name__}: {e}")
            return 1
    print("PoV did not reproduce")
    return 0


if __name__ == "__main__":
    sys.exit(main())
