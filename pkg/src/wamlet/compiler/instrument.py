"""Profiling instrumentation: entry and success counters per clause."""

from __future__ import annotations


class CounterSource:
    """Hands out fresh counter ids."""

    def __init__(self):
        self.next_id = 0

    def fresh(self) -> int:
        self.next_id += 1
        return self.next_id - 1


def instrument(code: list, head_end: int, counters: CounterSource):
    """Return ``(new_code, entry_id, exit_id)``.

    The entry counter sits right after the head, so a clause whose head
    does not match is never counted.  The exit counter sits before the
    final ``deallocate``/``execute``/``proceed``.
    """
    entry = counters.fresh()
    exit_ = counters.fresh()
    code = list(code)
    code.insert(head_end, ("counter", entry))
    end = len(code) - 1
    if end >= 1 and code[end][0] in ("execute", "proceed"):
        if code[end - 1][0] == "deallocate":
            end -= 1
        code.insert(end, ("counter", exit_))
    else:
        code.append(("counter", exit_))
    return code, entry, exit_
