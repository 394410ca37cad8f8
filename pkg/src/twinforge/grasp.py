"""Embodiment-aware grasp candidates and ordered, wave-parallel planning.

Every (annotation, approach) pair the asset allows and the arm can execute
yields one unperturbed candidate plus ``K`` candidates whose approach
direction is tilted uniformly inside a cone of half-angle ``theta_max``.
Candidates are ranked by how comfortably the arm reaches the wrist position
they imply, so the search is biased toward directions with more reach.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .geometry import Vec3, cross, dist, normalize, quat_from_axis_angle, quat_rotate, scale, segment_hits_box, sub
from .scene import APPROACH_VECTORS, APPROACHES, EmbodimentProfile, ObjectAsset, Pose
from .seeding import rng_for

TCP_OFFSET = 0.10  # wrist sits this far behind the contact point along the approach
APPROACH_CLEARANCE = 0.15  # length of the approach segment checked for obstruction


@dataclass(frozen=True)
class AdaptationConfig:
    K: int = 8
    theta_max: float = 0.35
    P: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.K < 0 or self.theta_max < 0 or self.P < 1:
            raise ValueError("need K >= 0, theta_max >= 0 and P >= 1")


@dataclass(frozen=True)
class GraspCandidate:
    annotation_index: int
    approach: str
    perturbation_index: int  # 0 is the unperturbed pose
    perturbation_axis: Vec3
    perturbation_angle: float
    approach_vector: Vec3
    world_grasp_point: Vec3
    ee_point: Vec3
    required_width: float
    score: float

    def sort_key(self):
        return (-self.score, self.annotation_index, self.perturbation_angle,
                APPROACHES.index(self.approach), self.perturbation_index)


@dataclass(frozen=True)
class GraspPlan:
    candidate: GraspCandidate
    attempted: int


class EmptyCandidateSet(Exception):
    """No annotation allows an approach this embodiment can execute."""


class GraspFailure(Exception):
    def __init__(self, attempted: int, reasons: dict[str, int] | None = None):
        self.attempted = attempted
        self.reasons = dict(reasons or {})
        super().__init__(f"no feasible grasp among {attempted} candidates {self.reasons}")


@dataclass(frozen=True)
class GraspWorld:
    """What the planner needs to know about the surroundings of the target."""

    obstacles: tuple[tuple[Vec3, Vec3], ...] = ()
    table_height: float = 0.0


def score_reachability(world_point, arm_base, reach_radius: float) -> float:
    if reach_radius <= 0:
        raise ValueError("reach_radius must be positive")
    return max(0.0, 1.0 - dist(world_point, arm_base) / reach_radius)


def _perpendicular_basis(u) -> tuple[Vec3, Vec3]:
    helper = (1.0, 0.0, 0.0) if abs(u[0]) < 0.9 else (0.0, 1.0, 0.0)
    e1 = normalize(cross(u, helper))
    return e1, cross(u, e1)


def _score(ee_point, emb: EmbodimentProfile, arm: str | None) -> float:
    arms = ("left", "right") if arm is None else (arm,)
    return max(score_reachability(ee_point, emb.base(a), emb.reach_radius) for a in arms)


def enumerate_candidates(asset: ObjectAsset, instance_pose: Pose, emb: EmbodimentProfile,
                         cfg: AdaptationConfig, arm: str | None = None) -> list[GraspCandidate]:
    """All candidates for grasping ``asset`` at ``instance_pose``, best-ranked first.

    Scores use ``arm``'s base, or the better of the two bases when ``arm`` is None.
    """
    if not asset.grasp_annotations:
        raise EmptyCandidateSet(f"{asset.asset_id} has no grasp annotations")
    cos_max = math.cos(cfg.theta_max)
    out = []
    for ai, ann in enumerate(asset.grasp_annotations):
        contact = instance_pose.apply(ann.grasp_point)
        for approach in ann.allowed_approaches:
            if approach not in emb.feasible_approaches:
                continue
            u0 = APPROACH_VECTORS[approach]
            e1, e2 = _perpendicular_basis(u0)
            rng = rng_for(cfg.seed, ai, APPROACHES.index(approach))
            draws = [(e1, 0.0)]
            for _ in range(cfg.K):
                cos_t = 1.0 - rng.random() * (1.0 - cos_max)
                phi = 2.0 * math.pi * rng.random()
                axis = normalize((math.cos(phi) * e1[0] + math.sin(phi) * e2[0],
                                  math.cos(phi) * e1[1] + math.sin(phi) * e2[1],
                                  math.cos(phi) * e1[2] + math.sin(phi) * e2[2]))
                draws.append((axis, min(cfg.theta_max, math.acos(max(-1.0, min(1.0, cos_t))))))
            for pi, (axis, angle) in enumerate(draws):
                u = quat_rotate(quat_from_axis_angle(axis, angle), u0) if angle else u0
                ee = sub(contact, scale(u, TCP_OFFSET))
                out.append(GraspCandidate(ai, approach, pi, axis, angle, u, contact, ee,
                                          ann.required_width, _score(ee, emb, arm)))
    if not out:
        raise EmptyCandidateSet(
            f"{asset.asset_id}: no allowed approach is feasible for {emb.name} {emb.feasible_approaches}")
    out.sort(key=GraspCandidate.sort_key)
    return out


def infeasibility(c: GraspCandidate, world: GraspWorld, arm: str, emb: EmbodimentProfile,
                  reach_margin_frac: float = 0.02) -> str | None:
    """Why the candidate cannot be executed ('reach', 'width', 'blocked'), or None."""
    if dist(c.ee_point, emb.base(arm)) >= emb.reach_radius * (1.0 - reach_margin_frac):
        return "reach"
    if c.required_width > emb.max_gripper_width:
        return "width"
    start = c.world_grasp_point
    end = sub(start, scale(c.approach_vector, APPROACH_CLEARANCE))
    if min(start[2], end[2]) < world.table_height:
        return "blocked"
    for lo, hi in world.obstacles:
        if segment_hits_box(start, end, lo, hi):
            return "blocked"
    return None


def plan_grasp(candidates: list[GraspCandidate], world: GraspWorld, arm: str, emb: EmbodimentProfile,
               cfg: AdaptationConfig, reach_margin_frac: float = 0.02, executor=None) -> GraspPlan:
    """Try candidates in rank order, ``cfg.P`` per wave; the lowest-ranked feasible one wins.

    ``executor`` (anything with ``map``) may evaluate a wave concurrently; the
    choice never depends on it. Raises :class:`GraspFailure` when nothing fits.
    """
    mapper = executor.map if executor is not None else map
    reasons: dict[str, int] = {}
    check = lambda c: infeasibility(c, world, arm, emb, reach_margin_frac)  # noqa: E731
    for start in range(0, len(candidates), cfg.P):
        wave = candidates[start:start + cfg.P]
        results = list(mapper(check, wave))
        for c, why in zip(wave, results):
            if why is None:
                return GraspPlan(c, start + len(wave))
            reasons[why] = reasons.get(why, 0) + 1
    raise GraspFailure(len(candidates), reasons)
