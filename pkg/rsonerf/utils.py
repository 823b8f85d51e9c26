def parse_size(value):
    """
    ``"591x443"`` to ``(591, 443)``.
    """
    width, sep, height = value.lower().partition("x")
    if not sep:
        raise ValueError("Expected WIDTHxHEIGHT, got %r" % value)
    return int(width), int(height)


def parse_indices(value):
    """
    ``"0,4,8"`` to ``[0, 4, 8]``.
    """
    return [int(part) for part in value.split(",") if part.strip()]
