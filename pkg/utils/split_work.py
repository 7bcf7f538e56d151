from typing import List, Sequence


def split_evenly(items: Sequence, parts: int) -> List[list]:
    """
    Split a sequence into `parts` contiguous chunks whose sizes differ by at most one.
    Leading chunks get the extra items; empty chunks are dropped, so fewer than
    `parts` chunks come back when there are fewer items than parts.

    Parameters:
    items (sequence): the work items, e.g. global tree indices
    parts (int): number of workers

    Returns:
    List[list]: the chunks, in order
    """
    if parts < 1:
        raise ValueError(f"parts must be at least 1, got {parts}")
    size, extra = divmod(len(items), parts)
    result = list()
    start = 0
    for i in range(parts):
        end = start + size + (1 if i < extra else 0)
        if end > start:
            result.append(list(items[start:end]))
        start = end
    return result
