"""Regenerate the bundled toy manifest and instruction pools.

    python3 tools/build_toy_data.py

Writes src/twinforge/data/toy_manifest.json and toy_pools.json. The outputs
are committed; rerun only after editing the tables below.
"""

from __future__ import annotations

import itertools
from pathlib import Path

from twinforge import canon

OUT = Path(__file__).resolve().parents[1] / "src" / "twinforge" / "data"

ALL = ["TOP_DOWN", "SIDE_XPOS", "SIDE_XNEG", "SIDE_YPOS", "SIDE_YNEG"]
SIDES = ALL[1:]


def fp(x, y, z, yaw_quat=(1.0, 0.0, 0.0, 0.0)):
    return {"position": [x, y, z], "orientation": list(yaw_quat)}


def grasp(point, axis, approaches, width):
    return {"grasp_point": list(point), "grasp_axis": list(axis), "allowed_approaches": approaches,
            "required_width": width}


# asset_id -> (category, half extents, grasps, functional points, 12 train + 3 eval descriptions)
ASSETS = {
    "shoe_0": ("shoe", (0.045, 0.10, 0.035),
               [grasp((0, 0, 0.0), (1, 0, 0), ["TOP_DOWN", "SIDE_YPOS", "SIDE_YNEG"], 0.08),
                grasp((0, 0.06, 0.01), (1, 0, 0), ["TOP_DOWN", "SIDE_XPOS", "SIDE_XNEG"], 0.05)],
               [fp(0, 0, -0.035), fp(0, 0, 0.035)],
               ["shoe", "sneaker", "white sneaker", "white running shoe", "sneaker with laces",
                "low-top white shoe", "canvas shoe with a rubber sole", "white shoe with gray laces",
                "lace-up sneaker", "sporty white shoe", "rubber-soled sneaker", "small white trainer",
                "scuffed tennis trainer with a velcro strap", "pale athletic footwear", "cream plimsoll"]),
    "shoe_1": ("shoe", (0.04, 0.095, 0.04),
               [grasp((0, 0, 0.0), (1, 0, 0), ["TOP_DOWN", "SIDE_YPOS", "SIDE_YNEG"], 0.075)],
               [fp(0, 0, -0.04), fp(0, 0, 0.04)],
               ["boot", "brown boot", "leather boot", "short brown boot", "ankle boot",
                "brown leather shoe", "boot with a thick heel", "dark brown ankle boot",
                "laced leather boot", "sturdy brown boot", "work boot", "brown hiking shoe",
                "chestnut chukka", "walnut toned desert footwear", "tan suede bootie"]),
    "block_0": ("block", (0.05, 0.05, 0.02),
                [grasp((0, 0, 0), (1, 0, 0), ALL, 0.06)],
                [fp(0, 0, 0.02), fp(0, 0, -0.02)],
                ["block", "wooden block", "square block", "flat block", "small square tile",
                 "red wooden block", "red cube-shaped block", "flat red block", "red building block",
                 "square red slab", "block with smooth faces", "small red platform",
                 "crimson timber pad", "scarlet chunk of pine", "ruby toy brick"]),
    "bottle_0": ("bottle", (0.03, 0.03, 0.09),
                 [grasp((0, 0, 0.02), (1, 0, 0), SIDES, 0.065),
                  grasp((0, 0, 0.08), (1, 0, 0), ["TOP_DOWN"], 0.04)],
                 [fp(0, 0, -0.09), fp(0, 0, 0.09)],
                 ["bottle", "red bottle", "red soda bottle", "plastic red bottle",
                  "red bottle with a yellow sticker", "red plastic bottle", "smooth red bottle",
                  "red bottle with a white cap", "soda bottle", "tall red bottle",
                  "bottle with a screw cap", "red drink bottle",
                  "cherry tinted beverage flask", "carmine pop vessel", "vermilion fizzy drink container"]),
    "bottle_1": ("bottle", (0.03, 0.03, 0.1),
                 [grasp((0, 0, 0.02), (1, 0, 0), SIDES, 0.065),
                  grasp((0, 0, 0.09), (1, 0, 0), ["TOP_DOWN"], 0.04)],
                 [fp(0, 0, -0.1), fp(0, 0, 0.1)],
                 ["green bottle", "green glass bottle", "tall green bottle", "green water bottle",
                  "bottle with a green label", "green plastic bottle", "transparent green bottle",
                  "green bottle with a black cap", "narrow green bottle", "dark green bottle",
                  "green juice bottle", "slim green bottle",
                  "emerald hued carafe", "olive shaded liquid holder", "jade glass decanter"]),
    "can_0": ("can", (0.033, 0.033, 0.06),
              [grasp((0, 0, 0.0), (1, 0, 0), SIDES, 0.07),
               grasp((0, 0, 0.05), (1, 0, 0), ["TOP_DOWN"], 0.05)],
              [fp(0, 0, -0.06), fp(0, 0, 0.06)],
              ["can", "sauce can", "tin can", "metal can", "red sauce can", "tomato sauce can",
               "food can", "small tin", "can with a paper label", "short metal can",
               "can of tomato sauce", "steel food can",
               "cylindrical preserve canister", "aluminium conserve drum", "labeled pantry cylinder"]),
    "pot_0": ("pot", (0.10, 0.10, 0.07),
              [grasp((0.11, 0, 0.05), (0, 1, 0), ["TOP_DOWN", "SIDE_XNEG"], 0.03)],
              [fp(0, 0, 0.07), fp(-0.17, 0, -0.07), fp(0.17, 0, -0.07)],
              ["pot", "kitchenpot", "gray kitchenpot", "cooking pot", "steel pot", "gray pot",
               "metal cooking pot", "pot with a handle", "gray steel kitchenpot", "soup pot",
               "round cooking pot", "stainless pot",
               "silver stockpot", "pewter simmering vessel", "ash colored braiser"]),
    "mug_0": ("mug", (0.045, 0.04, 0.05),
              [grasp((0, 0, 0.0), (1, 0, 0), ALL, 0.07)],
              [fp(0, 0, -0.05), fp(0, 0, 0.05)],
              ["mug", "coffee mug", "white mug", "ceramic mug", "mug with a handle", "tea mug",
               "white coffee cup", "ceramic cup", "glazed mug", "tall white mug", "breakfast mug",
               "mug with a blue stripe",
               "porcelain beaker", "ivory stoneware tankard", "milky earthenware vessel"]),
    "plate_0": ("plate", (0.09, 0.09, 0.01),
                [grasp((0.08, 0, 0.0), (0, 0, 1), ["TOP_DOWN", "SIDE_XNEG"], 0.02)],
                [fp(0, 0, 0.01), fp(0, 0, -0.01)],
                ["plate", "white plate", "dinner plate", "flat plate", "round plate", "ceramic plate",
                 "small plate", "dish", "white dish", "shallow plate", "side plate", "plain plate",
                 "porcelain platter", "snowy saucer", "alabaster charger"]),
    "bowl_0": ("bowl", (0.07, 0.07, 0.03),
               [grasp((0.065, 0, 0.01), (0, 1, 0), ["TOP_DOWN", "SIDE_XNEG", "SIDE_XPOS"], 0.02)],
               [fp(0, 0, 0.03), fp(0, 0, -0.03)],
               ["bowl", "blue bowl", "small bowl", "plastic bowl", "round bowl", "soup bowl",
                "shallow bowl", "blue plastic bowl", "mixing bowl", "cereal bowl", "empty bowl",
                "light blue bowl",
                "azure basin", "cobalt porringer", "sapphire serving vessel"]),
    "sponge_0": ("sponge", (0.05, 0.035, 0.015),
                 [grasp((0, 0, 0), (1, 0, 0), ALL, 0.07)],
                 [fp(0, 0, -0.015), fp(0, 0, 0.015)],
                 ["sponge", "yellow sponge", "kitchen sponge", "dish sponge", "scrub sponge",
                  "soft sponge", "rectangular sponge", "yellow kitchen sponge", "cleaning sponge",
                  "green and yellow sponge", "foam sponge", "small sponge",
                  "lemon scouring pad", "golden scrubber", "amber cellulose cleaner"]),
}

EMBODIMENTS = [
    {"name": "aloha", "left_base": [-0.25, -0.30, 0.80], "right_base": [0.25, -0.30, 0.80],
     "reach_radius": 0.65, "feasible_approaches": ["TOP_DOWN", "SIDE_YPOS", "SIDE_YNEG"],
     "max_gripper_width": 0.10, "dof": 6},
    {"name": "franka", "left_base": [-0.30, -0.35, 0.75], "right_base": [0.30, -0.35, 0.75],
     "reach_radius": 0.85, "feasible_approaches": ALL, "max_gripper_width": 0.10, "dof": 7},
    {"name": "ur5", "left_base": [-0.30, -0.40, 0.75], "right_base": [0.30, -0.40, 0.75],
     "reach_radius": 0.85, "feasible_approaches": ALL, "max_gripper_width": 0.10, "dof": 6},
    {"name": "piper", "left_base": [-0.25, -0.30, 0.78], "right_base": [0.25, -0.30, 0.78],
     "reach_radius": 0.60, "feasible_approaches": SIDES, "max_gripper_width": 0.09, "dof": 6},
    {"name": "arx", "left_base": [-0.25, -0.35, 0.80], "right_base": [0.25, -0.35, 0.80],
     "reach_radius": 0.70, "feasible_approaches": ["TOP_DOWN", "SIDE_XPOS", "SIDE_XNEG", "SIDE_YNEG"],
     "max_gripper_width": 0.09, "dof": 6},
]

PLACE_SHOE = """\
task place_shoe
arm a = arm_for(shoe)
grasp(a, shoe, pre=0.1, depth=0.0)
move_by(a, dz=0.07)
place(a, shoe, target=fp(target_block, 0), fp=0, pre=0.12, constrain=align)
open(a)
"""

DUAL_BOTTLES = """\
task pick_dual_bottles
together { grasp(left, bottle_a, pre=0.1, depth=0.0)
  move_by(left, dz=0.1)
| grasp(right, bottle_b, pre=0.1, depth=0.0)
  move_by(right, dz=0.1)
}
"""

CAN_LEFT_OF_POT = """\
task place_can_left_of_pot
arm a = arm_for(can)
grasp(a, can, pre=0.1, depth=0.0)
move_by(a, dz=0.05)
place(a, can, target=fp(pot, 1), fp=0, pre=0.1, constrain=free)
open(a)
home(a)
"""

LIFT_FAR_BLOCK = """\
task lift_far_block
arm a = arm_for(far_block)
grasp(a, far_block, pre=0.1, depth=0.0)
move_by(a, dz=0.05)
"""

FAR_BLOCK_Y = 0.435  # tuned so the expert lands 7 of 10 seeded trials on aloha

TASKS = [
    {"task_name": "place_shoe", "description": "put the shoe on top of the target block, aligned with it",
     "slots": [{"slot": "A", "instance_id": "shoe", "category": "shoe", "asset_id": "shoe_0",
                "position": [-0.12, 0.0], "yaw": 0.0},
               {"slot": "B", "instance_id": "target_block", "category": "block", "asset_id": "block_0",
                "position": [0.0, 0.12], "yaw": 0.0}],
     "checker": [{"type": "within_distance", "a": "shoe", "a_point": 0, "b": "target_block", "b_point": 0,
                  "tol": 0.01},
                 {"type": "on_top_of", "a": "shoe", "b": "target_block", "tol": 0.005},
                 {"type": "gripper_holding", "arm": "any", "obj": "shoe", "negate": True}],
     "expert_program": PLACE_SHOE},
    {"task_name": "pick_dual_bottles", "description": "lift both bottles at once, one per arm",
     "slots": [{"slot": "A", "instance_id": "bottle_a", "category": "bottle", "asset_id": "bottle_0",
                "position": [-0.15, 0.05], "yaw": 0.0},
               {"slot": "B", "instance_id": "bottle_b", "category": "bottle", "asset_id": "bottle_1",
                "position": [0.15, 0.05], "yaw": 0.0}],
     "checker": [{"type": "gripper_holding", "arm": "left", "obj": "bottle_a"},
                 {"type": "gripper_holding", "arm": "right", "obj": "bottle_b"}],
     "expert_program": DUAL_BOTTLES},
    {"task_name": "place_can_left_of_pot", "description": "set the can down on the table left of the pot",
     "slots": [{"slot": "A", "instance_id": "can", "category": "can", "asset_id": "can_0",
                "position": [-0.1, -0.05], "yaw": 0.0},
               {"slot": "B", "instance_id": "pot", "category": "pot", "asset_id": "pot_0",
                "position": [0.1, 0.12], "yaw": 0.0}],
     "checker": [{"type": "relative_x", "a": "can", "b": "pot", "sign": -1},
                 {"type": "within_distance", "a": "can", "a_point": 0, "b": "pot", "b_point": 1, "tol": 0.01},
                 {"type": "gripper_holding", "arm": "any", "obj": "can", "negate": True}],
     "expert_program": CAN_LEFT_OF_POT},
    {"task_name": "lift_far_block", "description": "lift a block sitting at the edge of the workspace",
     "slots": [{"slot": "A", "instance_id": "far_block", "category": "block", "asset_id": "block_0",
                "position": [0.25, FAR_BLOCK_Y], "yaw": 0.0}],
     "checker": [{"type": "gripper_holding", "arm": "any", "obj": "far_block"}],
     "expert_program": LIFT_FAR_BLOCK, "benchmark": False},
]

PUT_VERBS = ["Place", "Put", "Set", "Rest", "Drop", "Position", "Lay", "Move", "Stand", "Settle"]
PUT_LOWER = [v.lower() for v in PUT_VERBS]
LIFT_VERBS = ["Pick up", "Lift", "Grab", "Raise", "Take", "Hold up", "Seize", "Collect", "Hoist", "Grip"]


def _forms(structures, verbs, n):
    out = [s.format(v=v, A="{A}", B="{B}", a="{a}", b="{b}") for s, v in itertools.product(structures, verbs)]
    assert len(out) >= n and len(set(out)) == len(out)
    return out[:n]


def _templates(plain, arm, eval_plain, eval_arm):
    """42 train templates without arms, 8 with arms; 8 + 2 for eval."""
    train = plain[:42] + arm[:8]
    ev = list(eval_plain) + list(eval_arm)
    assert len(train) == 50 and len(ev) == 10 and not set(train) & set(ev)
    return train + ev


TEMPLATES = {
    "place_shoe": _templates(
        _forms(["{v} {A} on {B}.", "{v} {A} onto {B}.", "{v} {A} on top of {B}.", "{v} {A} atop {B}.",
                "{v} {A} so that it sits on {B}."], PUT_VERBS, 42),
        _forms(["Use {a} to {v} {A} on {B}."], PUT_LOWER, 8),
        ["Carefully transfer {A} over to {B} and release it there.",
         "Get {A} resting squarely upon {B}.",
         "{B} should end up carrying {A}; make that happen.",
         "Lift {A} and let it come down on {B}.",
         "Have {A} land on the upper face of {B}.",
         "Relocate {A} until it is sitting upon {B}.",
         "Bring {A} across and leave it perched on {B}.",
         "Stack {A} neatly over {B}."],
        ["With {a}, bring {A} over and leave it on {B}.", "Employ {a} to stack {A} upon {B}."]),
    "pick_dual_bottles": _templates(
        _forms(["{v} {A} and {B} together.", "{v} both {A} and {B}.", "{v} {A} along with {B}.",
                "{v} {A} and {B} simultaneously.", "{v} {A} and {B} at once."], LIFT_VERBS, 42),
        _forms(["Use {a} for {A} and {b} for {B}; {v} them together."],
               [v.lower() for v in LIFT_VERBS], 8),
        ["Get {A} and {B} off the table in one motion.",
         "Each hand should end up holding one of {A} and {B}.",
         "In a single coordinated move, raise {A} as well as {B}.",
         "Bring {A} and {B} upward at the same moment.",
         "Elevate {A} plus {B} in unison.",
         "Have the two grippers lift {A} and {B} concurrently.",
         "Clear {A} and {B} from the tabletop together in one go.",
         "Hoist up the pair: {A} and {B}."],
        ["Let {a} handle {A} while {b} handles {B}, both rising together.",
         "Coordinate {a} and {b} so that {A} and {B} leave the table at once."]),
    "place_can_left_of_pot": _templates(
        _forms(["{v} {A} to the left of {B}.", "{v} {A} left of {B}.", "{v} {A} on the left side of {B}.",
                "{v} {A} beside {B} on its left.", "{v} {A} next to {B}, on the left."], PUT_VERBS, 42),
        ["Use {a} to place {A} to the left of {B}."]
        + _forms(["Use {a} to {v} {A} left of {B}."], PUT_LOWER[1:], 7),
        ["Shift {A} so it ends up west of {B}.",
         "Get {A} onto the table at the left-hand side of {B}.",
         "{A} belongs just leftward of {B}; move it there.",
         "Transfer {A} until {B} is on its right.",
         "Relocate {A} to the spot that flanks {B} on the left.",
         "Leave {A} standing by the left flank of {B}.",
         "Bring {A} around and park it leftward of {B}.",
         "Carry {A} over to the region left of {B}."],
        ["With {a}, shift {A} so it rests left of {B}.", "Employ {a} and park {A} leftward of {B}."]),
    "lift_far_block": _templates(
        _forms(["{v} {A}.", "{v} {A} off the table.", "{v} {A} a little.", "{v} {A} from the table.",
                "{v} {A} slightly."], LIFT_VERBS, 42),
        _forms(["Use {a} to {v} {A}."], [v.lower() for v in LIFT_VERBS], 8),
        ["Get {A} airborne.", "Raise {A} clear of the tabletop.", "Elevate {A} by a few centimeters.",
         "Have {A} leave the table surface.", "Bring {A} upward.", "Make {A} hover above the table.",
         "Clear {A} from the surface.", "Hoist the thing described as {A}."],
        ["With {a}, elevate {A}.", "Employ {a} so {A} rises."]),
}


def manifest() -> dict:
    assets = []
    for aid, (cat, half, grasps, fps, descs) in sorted(ASSETS.items()):
        assert len(descs) == 15 and len(set(descs)) == 15, aid
        assets.append({"asset_id": aid, "category": cat, "aabb_half_extents": list(half),
                       "grasp_annotations": grasps, "functional_points": fps,
                       "placement_points": [fps[0]], "descriptions": descs})
    textures = [{"texture_id": f"surface_{k:02d}", "tag": "surface"} for k in range(20)]
    textures += [{"texture_id": f"background_{k:02d}", "tag": "background"} for k in range(10)]
    return {"schema_version": 1, "assets": assets, "embodiments": EMBODIMENTS, "tasks": TASKS,
            "textures": textures}


def pools() -> dict:
    tasks = {name: {"templates": t, "splits": {"train": list(range(50)), "eval": list(range(50, 60))}}
             for name, t in sorted(TEMPLATES.items())}
    descriptions = {aid: {"splits": {"train": list(range(12)), "eval": [12, 13, 14]}} for aid in sorted(ASSETS)}
    return {"schema_version": 1, "tasks": tasks, "descriptions": descriptions}


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / "toy_manifest.json").write_text(canon.dump_document(manifest()), encoding="utf-8", newline="\n")
    (OUT / "toy_pools.json").write_text(canon.dump_document(pools()), encoding="utf-8", newline="\n")


if __name__ == "__main__":
    main()
