"""Query-efficient search for a working sticker placement.

A small population of placements (position on the valid region + in-plane
angle) evolves against a black-box oracle. Each generation, the sorted
population spawns candidates two ways: a weighted difference of random
individuals anchored at the current best (global moves), and — for the top
slots — a probe of the compass neighbors around each parent, keeping the
lowest-loss one (local refinement that also spreads the search outward, since
probes skip every position already visited). A candidate replaces its slot
only if it strictly improves the selection criterion.

For dodging runs the criterion can switch once: when the best candidate still
resolves to the true identity but its lead over the runner-up falls below a
threshold, that runner-up becomes the promoted identity and the criterion
starts rewarding score transferred to it, which sharpens selection pressure
exactly when the decision is closest. Impersonation runs keep the plain loss
throughout.

Ablation variants: "de" (weighted-difference moves only), "adaptive-de"
(plus criterion switching), "region-de" (plus neighbor probes), "rhde"
(both).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import CompositeParams, composite
from .oracle import BudgetExhausted
from .paramspace import NoValidNeighbor, ParamVector, clip, neighbor, sample_uniform

DODGING = "dodging"
IMPERSONATION = "impersonation"
MODES = (DODGING, IMPERSONATION)

VARIANTS = ("de", "adaptive-de", "region-de", "rhde")

# floor for the true-identity score inside the promoted criterion's ratio
SCORE_FLOOR = 1e-6


class AttackSucceeded(Exception):
    """Raised the moment an evaluation satisfies the objective.

    Carries which evaluation path found the hit; `run` converts it into the
    returned AttackResult.
    """

    def __init__(self, trigger, theta, result):
        super().__init__(f"attack succeeded via {trigger}")
        self.trigger = trigger
        self.theta = theta
        self.result = result


@dataclass(frozen=True)
class Objective:
    """What counts as a win: evade the true identity, or become a chosen one."""

    mode: str
    ground_truth: str
    target: str = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == IMPERSONATION:
            if not self.target or self.target == self.ground_truth:
                raise ValueError("impersonation needs a target distinct from the truth")


@dataclass(frozen=True)
class SearchConfig:
    """Search knobs. A switch_threshold above 1 is read as percentage points."""

    population_size: int = 120
    generations: int = 30
    scale_factor: float = 0.5
    promote_scale: float = 20.0
    switch_threshold: float = 0.10
    neighbor_directions: int = 8
    neighbor_step: int = 1
    inbreed_fraction: float = 0.5
    variant: str = "rhde"
    seed: int = 0
    record_trace: bool = True

    def __post_init__(self):
        object.__setattr__(self, "variant", str(self.variant).lower())
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.population_size < 3:
            raise ValueError("population needs at least 3 individuals for crossover")
        if self.generations < 0:
            raise ValueError("generations must be nonnegative")
        if self.scale_factor <= 0:
            raise ValueError("scale_factor must be positive")
        if self.switch_threshold > 1.0:
            object.__setattr__(self, "switch_threshold", self.switch_threshold / 100.0)
        if not 0.0 <= self.switch_threshold <= 1.0:
            raise ValueError("switch_threshold must land in [0, 1] after normalization")
        if not 0.0 <= self.inbreed_fraction <= 1.0:
            raise ValueError("inbreed_fraction must lie in [0, 1]")
        if not 1 <= self.neighbor_directions <= 8:
            raise ValueError("neighbor_directions must lie in 1..8")
        if self.neighbor_step < 1:
            raise ValueError("neighbor_step must be at least 1")
        if self.promote_scale < 0:
            raise ValueError("promote_scale must be nonnegative")

    @property
    def uses_inbreeding(self):
        return self.variant in ("region-de", "rhde")

    @property
    def uses_switching(self):
        return self.variant in ("adaptive-de", "rhde")


@dataclass(eq=False)
class AttackContext:
    """Everything a run needs: the oracle, the search box, render assets.

    Oracles that score from parameters alone leave face/sticker/surface
    unused during the search; when present they still feed the final render.
    """

    oracle: object
    index: object
    bounds: object
    face: np.ndarray = None
    sticker: object = None
    surface: object = None

    def __post_init__(self):
        if self.oracle.needs_image and not self.can_render:
            raise ValueError("this oracle scores images: face, sticker and "
                             "surface are required")

    @property
    def can_render(self):
        return (self.face is not None and self.sticker is not None
                and self.surface is not None)

    def render(self, theta):
        if not self.can_render:
            raise ValueError("context has no renderable assets")
        cp = CompositeParams(position=self.index[theta.position_index],
                             angle=theta.angle)
        return composite(self.face, self.sticker, self.surface, cp)


@dataclass
class EvolutionState:
    """Mutable per-run search state."""

    generation: int = 0
    flag: int = 0
    promoted: str = None
    visited: set = field(default_factory=set)


@dataclass(eq=False)
class AttackResult:
    theta: ParamVector
    success: bool
    nq: int
    generations: int
    trigger: str
    result: object
    flag: int
    promoted: str
    image: np.ndarray
    trace: list


class _Individual:
    __slots__ = ("theta", "result")

    def __init__(self, theta, result):
        self.theta = theta
        self.result = result


def loss_value(result, objective):
    if objective.mode == DODGING:
        return result.prob(objective.ground_truth)
    return 1.0 - result.prob(objective.target)


def loss(theta, objective, ctx):
    """Score one placement: render if the oracle needs pixels, query, map."""
    image = ctx.render(theta) if ctx.oracle.needs_image else None
    result = ctx.oracle.query(image=image, params=theta)
    return loss_value(result, objective), result


def is_success(result, objective):
    if objective.mode == DODGING:
        return result.top1 != objective.ground_truth
    return result.top1 == objective.target


def compute_bound(result):
    """Decision margin: top probability minus runner-up probability."""
    items = result.items()
    if len(items) < 2:
        raise ValueError("need at least two labels to measure the margin")
    return items[0][1] - items[1][1]


def adaptive_criterion(result, ground_truth, promoted, promote_scale):
    """Post-switch criterion: reward probability flowing to the promoted label.

    The true-identity score is floored so the ratio term stays finite.
    """
    f_true = max(result.prob(ground_truth), SCORE_FLOOR)
    f_promoted = result.prob(promoted)
    return f_true - f_promoted + promote_scale * (1.0 - f_promoted / f_true)


def criterion_value(result, objective, state, config):
    """Selection criterion under the current phase (impersonation never switches)."""
    if objective.mode == IMPERSONATION or not state.flag:
        return loss_value(result, objective)
    return adaptive_criterion(result, objective.ground_truth, state.promoted,
                              config.promote_scale)


def crossover_candidate(vectors, rng, scale, bounds):
    """Best-anchored weighted difference of two random other individuals.

    `vectors` must be sorted best first; the candidate is
    clip(best + scale * (donor1 - donor2)) with the donors drawn uniformly
    from the non-best slots, distinct from each other.
    """
    if len(vectors) < 3:
        raise ValueError("crossover needs at least three individuals")
    base = vectors[0]
    pool = list(range(1, len(vectors)))
    g1 = pool.pop(int(rng.integers(0, len(pool))))
    g2 = pool[int(rng.integers(0, len(pool)))]
    d1, d2 = vectors[g1], vectors[g2]
    pos = base.position_index + scale * (d1.position_index - d2.position_index)
    ang = base.angle + scale * (d1.angle - d2.angle)
    return clip(ParamVector(pos, ang), bounds)


def inbreed_candidate(parent, objective, ctx, state, config):
    """Probe the parent's unvisited compass neighbors, keep the lowest loss.

    Every probe is a counted oracle query and joins the visited set; ties go
    to the lowest direction index (clockwise from north). Directions with no
    reachable position are skipped; raises NoValidNeighbor if that is all of
    them, and AttackSucceeded the moment a probe satisfies the objective.
    """
    best = None
    for direction in range(1, config.neighbor_directions + 1):
        try:
            probe = neighbor(parent, direction, config.neighbor_step,
                             ctx.index, state.visited)
        except NoValidNeighbor:
            continue
        value, result = loss(probe, objective, ctx)
        state.visited.add(ctx.index[probe.position_index])
        if is_success(result, objective):
            raise AttackSucceeded("inbreed_probe", probe, result)
        if best is None or value < best[0]:
            best = (value, probe, result)
    if best is None:
        raise NoValidNeighbor(f"no probe direction available around {parent}")
    return best[1], best[0], best[2]


def _sorted_population(population, state, config, objective):
    order = sorted(range(len(population)),
                   key=lambda i: criterion_value(population[i].result,
                                                 objective, state, config))
    return [population[i] for i in order]


def step(population, state, config, objective, ctx, rng):
    """One generation: sort, spawn candidates, maybe switch criterion, select.

    Candidate slots follow the sorted order: the top ceil(inbreed_fraction*P)
    slots probe neighbors (falling back to a crossover draw when a parent has
    none), the rest use crossover; crossover vectors for a generation are
    drawn serially before their evaluations. Returns the selected population
    and a trace entry; raises AttackSucceeded on any winning evaluation and
    lets BudgetExhausted propagate.
    """
    pop = _sorted_population(population, state, config, objective)
    best = pop[0]
    if is_success(best.result, objective):
        raise AttackSucceeded("population_best", best.theta, best.result)

    size = len(pop)
    flag_before = state.flag
    vectors = [ind.theta for ind in pop]
    n_inbreed = math.ceil(config.inbreed_fraction * size) if config.uses_inbreeding else 0
    candidates = [None] * size

    for i in range(n_inbreed):
        try:
            theta, _, result = inbreed_candidate(pop[i].theta, objective, ctx,
                                                 state, config)
        except NoValidNeighbor:
            theta = crossover_candidate(vectors, rng, config.scale_factor, ctx.bounds)
            _, result = loss(theta, objective, ctx)
            state.visited.add(ctx.index[theta.position_index])
            if is_success(result, objective):
                raise AttackSucceeded("candidate", theta, result)
        candidates[i] = _Individual(theta, result)

    pending = [crossover_candidate(vectors, rng, config.scale_factor, ctx.bounds)
               for _ in range(n_inbreed, size)]
    for slot, theta in zip(range(n_inbreed, size), pending):
        _, result = loss(theta, objective, ctx)
        state.visited.add(ctx.index[theta.position_index])
        if is_success(result, objective):
            raise AttackSucceeded("candidate", theta, result)
        candidates[slot] = _Individual(theta, result)

    # the candidate occupying the best slot decides the one-way criterion switch
    switched = False
    if config.uses_switching and objective.mode == DODGING and state.flag == 0:
        lead = candidates[0].result
        if (lead.top1 == objective.ground_truth and lead.top2 is not None
                and compute_bound(lead) <= config.switch_threshold):
            state.flag = 1
            state.promoted = lead.top2
            switched = True

    j_before = [criterion_value(ind.result, objective, state, config) for ind in pop]
    j_cand = [criterion_value(c.result, objective, state, config) for c in candidates]
    selected = []
    j_after = []
    for i in range(size):
        if j_cand[i] < j_before[i]:  # strict: ties keep the incumbent
            selected.append(candidates[i])
            j_after.append(j_cand[i])
        else:
            selected.append(pop[i])
            j_after.append(j_before[i])

    entry = {
        "generation": state.generation,
        "flag_before": flag_before,
        "flag_after": state.flag,
        "switched": switched,
        "promoted": state.promoted,
        "j_before": j_before,
        "j_candidates": j_cand,
        "j_after": j_after,
        "best_j": min(j_after),
        "population": [(ind.theta.position_index, ind.theta.angle)
                       for ind in selected],
    }
    state.generation += 1
    return selected, entry


def run(config, objective, ctx, rng=None):
    """Full search: sample and score an initial population, evolve, report.

    The initial population is always evaluated in full before the first
    success check. Stops at the first winning evaluation, after the last
    generation, or when the oracle budget runs out (reported as a failure at
    the queries already spent). The query count is the oracle counter's
    delta across the run.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    state = EvolutionState()
    trace = [] if config.record_trace else None
    start = ctx.oracle.counter.count
    population = []

    def finish(theta, result, success, trigger):
        image = ctx.render(theta) if theta is not None and ctx.can_render else None
        return AttackResult(theta=theta, success=success,
                            nq=ctx.oracle.counter.count - start,
                            generations=state.generation, trigger=trigger,
                            result=result, flag=state.flag,
                            promoted=state.promoted, image=image, trace=trace)

    try:
        for _ in range(config.population_size):
            theta = sample_uniform(rng, ctx.bounds)
            _, result = loss(theta, objective, ctx)
            state.visited.add(ctx.index[theta.position_index])
            population.append(_Individual(theta, result))
        for _ in range(config.generations):
            population, entry = step(population, state, config, objective, ctx, rng)
            if trace is not None:
                trace.append(entry)
    except AttackSucceeded as hit:
        return finish(hit.theta, hit.result, True, hit.trigger)
    except BudgetExhausted:
        if population:
            best = _sorted_population(population, state, config, objective)[0]
            return finish(best.theta, best.result, False, "budget_exhausted")
        return finish(None, None, False, "budget_exhausted")

    best = _sorted_population(population, state, config, objective)[0]
    success = is_success(best.result, objective)
    return finish(best.theta, best.result, success,
                  "final_best" if success else None)
