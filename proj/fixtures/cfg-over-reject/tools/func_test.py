#!/usr/bin/env python3
"""Functional checks: ordinary hostnames must still be accepted."""
import sys


def main():
    sys.path.insert(0, sys.argv[1])
    import host_rules

    checks = [
        ("example.com", True),
        ("localhost", True),
        ("web-01.internal", True),
        ("", False),
        ("bad..host", False),
    ]
    failures = 0
    for host, want in checks:
        got = host_rules.validate_host(host)
        if got != want:
            print(f"FAIL validate_host({host!r}): expected {want}, got {got}")
            failures += 1
        else:
            print(f"ok   validate_host({host!r}) -> {got}")
    if host_rules.normalize_host(" ZK1.Example.COM ") != "zk1.example.com":
        print("FAIL normalize_host")
        failures += 1
    if failures:
        print(f"{failures} functional test(s) failed")
        return 1
    print("all functional tests passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
