"""Fixed-width record parsing helpers.

A record blob is a 4-byte header followed by 2-byte fields; the second
byte of each field carries its value.
"""

HEADER_SIZE = 4


def read_header(data):
    """Return the 4-byte header of a record blob."""
    return data[:HEADER_SIZE]


def read_field(data, index):
    """Return the value byte of field `index`."""
    offset = HEADER_SIZE + index * 2
    return data[offset + 1]


def field_count(data):
    """Number of complete fields present after the header."""
    if len(data) <= HEADER_SIZE:
        return 0
    return (len(data) - HEADER_SIZE) // 2
