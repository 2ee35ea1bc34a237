from pathlib import Path

import pytest

from scribebench.dataset import (
    BadName,
    EmptyRegistry,
    OrphanImage,
    OrphanTruth,
    Registry,
    RevisionConflict,
    SampleNotFound,
    SplitSpec,
    UnassignedSamples,
    ValidationFailed,
    VolunteerRecord,
    load_volunteers,
    splitmix64,
)
from scribebench.engines import EngineConfig
from scribebench.synth import write_corpus

ALAPH = "ܐ"
BETH = "ܒ"

DATA = Path(__file__).parent / "data"


def make_pair(directory: Path, sample_id: str, text: str = ALAPH + BETH):
    directory.mkdir(parents=True, exist_ok=True)
    (directory / f"{sample_id}.png").write_bytes(_TINY_PNG)
    (directory / f"{sample_id}.gt.txt").write_text(text + "\n", encoding="utf-8")


# 1x1 white PNG, enough for registry-level tests
import io

from PIL import Image

buf = io.BytesIO()
Image.new("L", (1, 1), 255).save(buf, format="PNG")
_TINY_PNG = buf.getvalue()


class TestSplitmix:
    def test_known_stream_head(self):
        # splitmix64(0) begins with these values in every implementation
        gen = splitmix64(0)
        assert next(gen) == 0xE220A8397B1DCDAF
        assert next(gen) == 0x6E789E6AA1B965F4

    def test_seed_changes_stream(self):
        assert next(splitmix64(1)) != next(splitmix64(2))


class TestIngest:
    def test_minimal_pair(self, tmp_path):
        make_pair(tmp_path / "d", "a01_01")
        reg = Registry.ingest(tmp_path / "d")
        sample = reg.get("a01_01")
        assert (sample.batch, sample.author, sample.seq) == ("a", 1, 1)
        assert sample.ground_truth == ALAPH + BETH
        assert sample.status == "clean"
        assert sample.revision == 1

    def test_orphan_image(self, tmp_path):
        d = tmp_path / "d"
        d.mkdir()
        (d / "a01_01.png").write_bytes(_TINY_PNG)
        with pytest.raises(OrphanImage) as err:
            Registry.ingest(d)
        assert err.value.ids == ["a01_01"]

    def test_orphan_truth(self, tmp_path):
        d = tmp_path / "d"
        d.mkdir()
        (d / "b02_03.gt.txt").write_text(ALAPH, encoding="utf-8")
        with pytest.raises(OrphanTruth):
            Registry.ingest(d)

    def test_bad_name(self, tmp_path):
        d = tmp_path / "d"
        make_pair(d, "a01_01")
        (d / "x9.png").write_bytes(_TINY_PNG)
        (d / "x9.gt.txt").write_text(ALAPH, encoding="utf-8")
        with pytest.raises(BadName) as err:
            Registry.ingest(d)
        assert err.value.ids == ["x9"]

    def test_ignores_unrelated_files(self, tmp_path):
        d = tmp_path / "d"
        make_pair(d, "a05_07")
        (d / "notes.json").write_text("{}")
        (d / "list.train").write_text("a05_07\n")
        reg = Registry.ingest(d)
        assert reg.ids() == ["a05_07"]

    def test_normalizes_ground_truth(self, tmp_path):
        make_pair(tmp_path / "d", "a01_01", f"  {ALAPH}ܰ  {BETH} ")
        reg = Registry.ingest(tmp_path / "d")
        assert reg.get("a01_01").ground_truth == f"{ALAPH} {BETH}"


class TestManifest:
    def test_roundtrip(self, tmp_path):
        d = tmp_path / "d"
        for i in range(1, 4):
            make_pair(d, f"a01_{i:02d}")
        reg = Registry.ingest(d)
        reg.patch("a01_02", status="rejected")
        path = reg.save_manifest()
        back = Registry.load_manifest(path)
        assert back.ids() == reg.ids()
        assert back.get("a01_02").status == "rejected"
        assert back.get("a01_02").revision == 2


class TestPatch:
    def make_registry(self, tmp_path) -> Registry:
        make_pair(tmp_path / "d", "a01_01")
        return Registry.ingest(tmp_path / "d")

    def test_happy_path_bumps_revision(self, tmp_path):
        reg = self.make_registry(tmp_path)
        out = reg.patch("a01_01", ground_truth=BETH, expected_revision=1)
        assert out.revision == 2
        assert out.ground_truth == BETH

    def test_stale_revision_conflict(self, tmp_path):
        reg = self.make_registry(tmp_path)
        reg.patch("a01_01", status="clean", expected_revision=1)
        with pytest.raises(RevisionConflict) as err:
            reg.patch("a01_01", status="raw", expected_revision=1)
        assert err.value.current_revision == 2
        assert reg.get("a01_01").status == "clean"  # unchanged

    def test_charset_gate(self, tmp_path):
        reg = self.make_registry(tmp_path)
        with pytest.raises(ValidationFailed) as err:
            reg.patch("a01_01", ground_truth="A" + ALAPH, expected_revision=1)
        assert err.value.violations == [(0, "A")]
        assert reg.get("a01_01").revision == 1

    def test_force_bypasses_charset(self, tmp_path):
        reg = self.make_registry(tmp_path)
        out = reg.patch("a01_01", ground_truth="A", expected_revision=1, force=True)
        assert out.ground_truth == "A"

    def test_unknown_sample(self, tmp_path):
        reg = self.make_registry(tmp_path)
        with pytest.raises(SampleNotFound):
            reg.patch("a99_99", status="clean")

    def test_revisions_never_decrease(self, tmp_path):
        reg = self.make_registry(tmp_path)
        seen = [reg.get("a01_01").revision]
        for status in ("raw", "clean", "rejected", "clean"):
            reg.patch("a01_01", status=status)
            seen.append(reg.get("a01_01").revision)
        assert seen == sorted(seen)
        assert len(set(seen)) == len(seen)


def corpus_registry(tmp_path, n=10) -> Registry:
    write_corpus(tmp_path / "corpus", n, seed=1)
    return Registry.ingest(tmp_path / "corpus")


class TestSplit:
    def test_sizes_under_floor_rule(self, tmp_path):
        reg = corpus_registry(tmp_path, 10)
        a = reg.split(SplitSpec(ratio_train=0.9, seed=0))
        assert (len(a.train), len(a.eval)) == (9, 1)

    def test_deterministic(self, tmp_path):
        reg = corpus_registry(tmp_path, 12)
        a = reg.split(SplitSpec(ratio_train=0.8, seed=5))
        b = reg.split(SplitSpec(ratio_train=0.8, seed=5))
        assert a == b

    def test_seed_changes_assignment_not_sizes(self, tmp_path):
        reg = corpus_registry(tmp_path, 20)
        a = reg.split(SplitSpec(ratio_train=0.7, seed=1))
        b = reg.split(SplitSpec(ratio_train=0.7, seed=2))
        assert (len(a.train), len(a.eval)) == (len(b.train), len(b.eval))
        assert a.train != b.train

    def test_partition_properties(self, tmp_path):
        reg = corpus_registry(tmp_path, 15)
        a = reg.split(SplitSpec(ratio_train=0.6, seed=3))
        train, evals = set(a.train), set(a.eval)
        assert train | evals == set(reg.clean_ids())
        assert train & evals == set()

    def test_only_clean_participate(self, tmp_path):
        reg = corpus_registry(tmp_path, 6)
        reg.patch("a01_01", status="rejected")
        a = reg.split(SplitSpec(ratio_train=0.5, seed=0))
        assert "a01_01" not in set(a.train) | set(a.eval)

    def test_empty_registry(self, tmp_path):
        reg = corpus_registry(tmp_path, 2)
        for sample_id in reg.ids():
            reg.patch(sample_id, status="raw")
        with pytest.raises(EmptyRegistry):
            reg.split(SplitSpec())

    def test_assignment_written_to_samples(self, tmp_path):
        reg = corpus_registry(tmp_path, 8)
        a = reg.split(SplitSpec(ratio_train=0.75, seed=0))
        for sample_id in a.train:
            assert reg.get(sample_id).split == "train"
        for sample_id in a.eval:
            assert reg.get(sample_id).split == "eval"

    def test_by_author_keeps_writers_together(self, tmp_path):
        reg = corpus_registry(tmp_path, 60)  # 3 authors x 20
        a = reg.split(SplitSpec(ratio_train=0.7, seed=1, by_author=True))
        train_authors = {reg.get(i).author for i in a.train}
        eval_authors = {reg.get(i).author for i in a.eval}
        assert train_authors.isdisjoint(eval_authors)
        assert set(a.train) | set(a.eval) == set(reg.clean_ids())
        again = corpus_registry(tmp_path, 60).split(
            SplitSpec(ratio_train=0.7, seed=1, by_author=True)
        )
        assert again == a


class TestStats:
    def test_volunteer_table(self, tmp_path):
        reg = corpus_registry(tmp_path, 4)
        volunteers = load_volunteers(DATA / "volunteers.csv")
        stats = reg.stats(volunteers)
        assert stats.gender_counts == {"Female": 13, "Male": 19}
        assert stats.mean_age == 22.5

    def test_empty_volunteers(self, tmp_path):
        reg = corpus_registry(tmp_path, 4)
        stats = reg.stats([])
        assert stats.gender_counts == {}
        assert stats.mean_age is None

    def test_singleton_mean(self, tmp_path):
        reg = corpus_registry(tmp_path, 4)
        stats = reg.stats([VolunteerRecord(gender="Male", age=40, occupation="x")])
        assert stats.mean_age == 40.0

    def test_partition_sums(self, tmp_path):
        reg = corpus_registry(tmp_path, 9)
        reg.patch("a01_02", status="rejected")
        stats = reg.stats()
        assert sum(stats.status_counts.values()) == stats.sample_count == 9
        assert sum(stats.split_counts.values()) == stats.sample_count

    def test_volunteer_validation(self):
        with pytest.raises(ValueError):
            VolunteerRecord(gender="Other", age=20, occupation="x")
        with pytest.raises(ValueError):
            VolunteerRecord(gender="Male", age=0, occupation="x")


class TestExport:
    def test_roundtrip_and_config(self, tmp_path):
        reg = corpus_registry(tmp_path, 6)
        assignment = reg.split(SplitSpec(ratio_train=0.5, seed=0))
        out = tmp_path / "layout"
        reg.export_training_layout(assignment, EngineConfig(), out)

        cfg_text = (out / "engine.cfg").read_text(encoding="utf-8")
        assert "LEARNING_RATE 0.0001\n" in cfg_text
        assert "MAX_ITERATIONS 10000\n" in cfg_text
        assert "START_MODEL syr\n" in cfg_text
        assert "LANG_TYPE RTL\n" in cfg_text

        back = Registry.ingest(out)
        assert back.ids() == reg.ids()
        for sample_id in back.ids():
            assert back.get(sample_id).ground_truth == reg.get(sample_id).ground_truth

        train_ids = (out / "list.train").read_text().split()
        eval_ids = (out / "list.eval").read_text().split()
        assert sorted(train_ids) == sorted(assignment.train)
        assert sorted(eval_ids) == sorted(assignment.eval)

    def test_two_sample_floor(self, tmp_path):
        reg = corpus_registry(tmp_path, 2)
        assignment = reg.split(SplitSpec(ratio_train=0.9, seed=0))
        assert (len(assignment.train), len(assignment.eval)) == (1, 1)

    def test_reexport_byte_identical(self, tmp_path):
        reg = corpus_registry(tmp_path, 5)
        assignment = reg.split(SplitSpec(ratio_train=0.8, seed=2))
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        reg.export_training_layout(assignment, EngineConfig(), out1)
        reg.export_training_layout(assignment, EngineConfig(), out2)
        for path1 in sorted(out1.iterdir()):
            assert path1.read_bytes() == (out2 / path1.name).read_bytes()

    def test_unassigned_rejected(self, tmp_path):
        reg = corpus_registry(tmp_path, 4)
        assignment = reg.split(SplitSpec(ratio_train=0.5, seed=0))
        from scribebench.dataset import SplitAssignment

        partial = SplitAssignment(train=assignment.train[:1], eval=assignment.eval[:1])
        with pytest.raises(UnassignedSamples):
            reg.export_training_layout(partial, EngineConfig(), tmp_path / "bad")
