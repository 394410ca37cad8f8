import hashlib
import json
from dataclasses import replace

import pytest

from twinforge.dataset import (
    SHARD_SIZE,
    EpisodeRecord,
    ValidationError,
    export_episodes,
    generate_episodes,
    import_episodes,
    load_manifest,
    split_train_eval,
    validate_dataset,
)
from twinforge.sim import TrialLog


def stub(seed, task="t", success=True, split="train"):
    return EpisodeRecord(task, "aloha", seed, {"mode": "easy"}, "do it", "task t\n",
                         TrialLog(0, seed, (), success), success, split)


@pytest.fixture(scope="module")
def shoe_episodes(lib, aloha, pools):
    return generate_episodes(lib.tasks["place_shoe"], lib, aloha, pools, 40, mode="hard", seed=3)


def test_no_records_no_shards(tmp_path):
    m = export_episodes([], tmp_path)
    assert m.files == () and m.total == 0
    assert sorted(p.name for p in tmp_path.iterdir()) == ["manifest.json"]
    assert validate_dataset(tmp_path).ok


def test_one_past_a_full_shard(tmp_path):
    m = export_episodes([stub(i) for i in range(SHARD_SIZE + 1)], tmp_path)
    assert [(f.name, f.episodes) for f in m.files] == [("episodes_0.jsonl", SHARD_SIZE), ("episodes_1.jsonl", 1)]
    assert m.total == SHARD_SIZE + 1


def test_digests_are_shard_sha256(tmp_path):
    m = export_episodes([stub(i) for i in range(5)], tmp_path, shard_size=2)
    for f in m.files:
        assert f.sha256 == hashlib.sha256((tmp_path / f.name).read_bytes()).hexdigest()
    assert load_manifest(tmp_path) == m


def test_round_trip_of_generated_episodes(lib, aloha, pools, tmp_path):
    recs = []
    for name in lib.benchmark_tasks():
        recs += generate_episodes(lib.tasks[name], lib, aloha, pools, 500 // len(lib.benchmark_tasks()) + 1,
                                  mode="hard", seed=1)
    recs = recs[:500]
    export_episodes(recs, tmp_path, shard_size=128)
    assert import_episodes(tmp_path) == recs
    report = validate_dataset(tmp_path)
    assert report.ok and report.episodes == 500


def test_flipped_byte_is_a_digest_violation(shoe_episodes, tmp_path):
    export_episodes(shoe_episodes, tmp_path, shard_size=16)
    shard = tmp_path / "episodes_1.jsonl"
    data = bytearray(shard.read_bytes())
    i = data.index(b'"instruction":"') + 15  # first letter of an instruction
    data[i] ^= 0x01
    shard.write_bytes(bytes(data))
    assert validate_dataset(tmp_path).violations == ["episodes_1.jsonl: digest mismatch"]


def test_count_off_by_one(shoe_episodes, tmp_path):
    export_episodes(shoe_episodes, tmp_path)
    doc = json.loads((tmp_path / "manifest.json").read_text())
    doc["files"][0]["episodes"] += 1
    doc["total"] += 1
    (tmp_path / "manifest.json").write_text(json.dumps(doc))
    v = validate_dataset(tmp_path).violations
    assert "episodes_0.jsonl: 40 lines, manifest says 41" in v
    assert "manifest: total 41, found 40 episodes" in v


def test_missing_shard_and_manifest(shoe_episodes, tmp_path):
    export_episodes(shoe_episodes, tmp_path)
    (tmp_path / "episodes_0.jsonl").unlink()
    assert "episodes_0.jsonl: missing" in validate_dataset(tmp_path).violations
    assert validate_dataset(tmp_path / "nowhere").violations[0].startswith("manifest: unreadable")


def test_corrupt_line_is_reported_not_raised(tmp_path):
    export_episodes([stub(0)], tmp_path)
    (tmp_path / "episodes_0.jsonl").write_text('{"task_name": 1}\n')
    v = validate_dataset(tmp_path).violations
    assert any(x.startswith("episodes_0.jsonl:1: bad record") for x in v)


def test_success_flag_must_match_its_log():
    with pytest.raises(ValidationError):
        replace(stub(0), success=False).check()
    with pytest.raises(ValidationError):
        export_episodes([replace(stub(0), split="dev")], "/nonexistent/never-written")


def test_counts_per_task_and_split(tmp_path):
    recs = [stub(0, "a"), stub(1, "a", success=False), stub(2, "b", split="eval")]
    m = export_episodes(recs, tmp_path)
    assert m.counts == {"a": {"eval": {"failure": 0, "success": 0}, "train": {"failure": 1, "success": 1}},
                        "b": {"eval": {"failure": 0, "success": 1}, "train": {"failure": 0, "success": 0}}}


def test_generation_is_seeded(lib, aloha, pools, shoe_episodes):
    again = generate_episodes(lib.tasks["place_shoe"], lib, aloha, pools, 40, mode="hard", seed=3)
    assert [r.to_json() for r in again] == [r.to_json() for r in shoe_episodes]
    other = generate_episodes(lib.tasks["place_shoe"], lib, aloha, pools, 40, mode="hard", seed=4)
    assert [r.episode_seed for r in other] != [r.episode_seed for r in shoe_episodes]


def test_easy_episodes_share_the_clean_scene(lib, aloha, pools):
    recs = generate_episodes(lib.tasks["place_shoe"], lib, aloha, pools, 5)
    assert len({json.dumps(r.scene, sort_keys=True) for r in recs}) == 1
    assert all(r.success for r in recs)


def test_split_labels_follow_the_pools(lib, pools, shoe_episodes):
    relabeled = split_train_eval(shoe_episodes, pools, lib)
    assert [r.split for r in relabeled] == [r.split for r in shoe_episodes]
    assert {"train", "eval"} == {r.split for r in relabeled}
    tp = pools.tasks["place_shoe"]
    forced = replace(shoe_episodes[0], template_index=tp.eval[0], split="train")
    assert split_train_eval([forced], pools, lib)[0].split == "eval"


def test_eval_description_alone_marks_eval(lib, pools, shoe_episodes):
    rec = next(r for r in shoe_episodes if r.split == "train")
    shoe_asset = next(o["asset_id"] for o in rec.scene["task_objects"] if o["instance_id"] == "shoe")
    slot = next(s.slot for s in lib.tasks["place_shoe"].slots if s.instance_id == "shoe")
    k = pools.descriptions[shoe_asset].eval[0]
    out = split_train_eval([replace(rec, description_indices={**rec.description_indices, slot: k})], pools, lib)
    assert out[0].split == "eval"


def test_unknown_mode():
    with pytest.raises(ValueError):
        generate_episodes(None, None, None, None, 1, mode="medium")
