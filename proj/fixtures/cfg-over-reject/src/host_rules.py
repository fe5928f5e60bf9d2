"""Hostname validation rules for peer configuration entries."""

MAX_LABEL = 63


def validate_host(host):
    """Return True when `host` is an acceptable peer hostname."""
    if not host:
        return False
    labels = host.split(".")
    for label in labels:
        if len(label) > MAX_LABEL:
            return False
        if not label[0].isalnum():
            return False
    return True


def normalize_host(host):
    """Canonical form used for comparisons: trimmed and lower-cased."""
    return host.strip().lower()
