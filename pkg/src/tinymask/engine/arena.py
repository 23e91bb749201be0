"""Static activation-arena planning: liveness along the execution chain, greedy first-fit."""
from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import BudgetExceeded
from ..netgraph.layers import Conv2D, Dense, Dropout, Fire, Flatten, GlobalAvgPool, MaxPool

FRAMEBUFFER_BYTES = 496 * 1024
ALIGN = 16


@dataclass(frozen=True)
class TensorLife:
    name: str
    size: int
    first: int
    last: int
    producer: str = ""


@dataclass
class Arena:
    capacity: int
    offsets: dict
    sizes: dict
    lifetimes: dict
    peak: int
    aliases: dict = field(default_factory=dict)

    def buffer_of(self, name):
        return self.aliases.get(name, name)

    def overlaps(self):
        """Pairs of simultaneously-live tensors whose byte ranges intersect (should be empty)."""
        bad = []
        names = list(self.offsets)
        for i, a in enumerate(names):
            for b in names[i + 1 :]:
                la, lb = self.lifetimes[a], self.lifetimes[b]
                live = la[0] <= lb[1] and lb[0] <= la[1]
                oa, ob = self.offsets[a], self.offsets[b]
                if live and oa < ob + self.sizes[b] and ob < oa + self.sizes[a]:
                    bad.append((a, b))
        return bad


def _align(n, align):
    return -(-n // align) * align


def plan_tensors(tensors, capacity, align=ALIGN) -> Arena:
    """First-fit placement of ``TensorLife`` items in creation order.

    Each tensor goes to the lowest aligned offset that does not collide with
    an already placed tensor whose live interval intersects its own.
    """
    if capacity <= 0:
        raise ValueError("arena capacity must be > 0")
    offsets, sizes, lifetimes = {}, {}, {}
    peak = 0
    for t in sorted(tensors, key=lambda t: t.first):
        live = sorted(
            (offsets[n], offsets[n] + sizes[n])
            for n in offsets
            if lifetimes[n][0] <= t.last and t.first <= lifetimes[n][1]
        )
        offset = 0
        for lo, hi in live:
            if offset + t.size <= lo:
                break
            offset = max(offset, _align(hi, align))
        offsets[t.name] = offset
        sizes[t.name] = t.size
        lifetimes[t.name] = (t.first, t.last)
        peak = max(peak, offset + t.size)
        if peak > capacity:
            raise BudgetExceeded(
                f"arena needs {peak} bytes at layer {t.producer or t.name!r}, capacity is {capacity}",
                layer=t.producer or t.name,
                required=peak,
                capacity=capacity,
            )
    return Arena(capacity, offsets, sizes, lifetimes, peak)


def _nbytes(shape, batch):
    n = batch
    for d in shape:
        n *= d
    return n


def model_tensors(net_cfg, batch=1):
    """(tensor lifetimes, aliases) for the int8 execution of ``net_cfg``.

    Step 0 quantizes the input; each conv/dense/pool is one step; a fire
    module is two (squeeze, then both expands into the shared output).
    Flatten and dropout alias their input buffer.
    """
    first, last, size, producer = {}, {}, {}, {}
    aliases = {}
    step = 0

    def new(name, shape, prod):
        first[name] = last[name] = step
        size[name] = _nbytes(shape, batch)
        producer[name] = prod

    def use(name):
        root = aliases.get(name, name)
        last[root] = max(last[root], step)

    new("input", net_cfg.input_shape, "input")
    prev = "input"
    for node in net_cfg.nodes:
        spec, name = node.spec, node.name
        if isinstance(spec, (Flatten, Dropout)):
            aliases[name] = aliases.get(prev, prev)
        elif isinstance(spec, Fire):
            step += 1
            use(prev)
            new(f"{name}.squeeze", (*node.out_shape[:2], spec.squeeze_1x1), name)
            step += 1
            use(f"{name}.squeeze")
            new(name, node.out_shape, name)
        elif isinstance(spec, (Conv2D, Dense, MaxPool, GlobalAvgPool)):
            step += 1
            use(prev)
            new(name, node.out_shape, name)
        prev = name
    # head stays live through dequantization
    step += 1
    use(prev)
    tensors = [TensorLife(n, size[n], first[n], last[n], producer[n]) for n in first]
    return tensors, aliases


def plan_arena(qmodel_or_cfg, capacity=FRAMEBUFFER_BYTES, batch=1, align=ALIGN) -> Arena:
    cfg = getattr(qmodel_or_cfg, "net_cfg", qmodel_or_cfg)
    tensors, aliases = model_tensors(cfg, batch)
    arena = plan_tensors(tensors, capacity, align)
    arena.aliases = aliases
    return arena
