import pytest

from fatroute import load, save, build_pgft
from fatroute.cli import main
from conftest import FIG_PARAMS


@pytest.fixture()
def topo_file(tmp_path):
    path = tmp_path / "topo.txt"
    rc = main([
        "generate", "--levels", "3", "--m", "2,2,3", "--w", "1,2,2",
        "--p", "1,2,1", "-o", str(path),
    ])
    assert rc == 0
    return path


def test_generate_matches_library(topo_file):
    assert topo_file.read_text() == save(build_pgft(FIG_PARAMS))


def test_generate_shuffled(tmp_path):
    out = tmp_path / "t.txt"
    assert main([
        "generate", "--levels", "1", "--m", "4", "--w", "1", "--p", "1",
        "--shuffle-uuids", "3", "-o", str(out),
    ]) == 0
    load(out.read_text()).validate()


def test_degrade_route_analyze_roundtrip(tmp_path, topo_file, capsys):
    t2 = tmp_path / "degraded.txt"
    assert main([
        "degrade", "-i", str(topo_file), "--kind", "links", "--amount", "2",
        "--seed", "7", "-o", str(t2),
    ]) == 0
    lft = tmp_path / "lft.txt"
    assert main(["route", "-i", str(t2), "--algo", "dmodc", "-o", str(lft)]) == 0
    report = tmp_path / "report.csv"
    detail = tmp_path / "detail.csv"
    assert main([
        "analyze", "-i", str(t2), "--lft", str(lft), "--pattern", "a2a",
        "-o", str(report), "--detail", str(detail),
    ]) == 0
    lines = report.read_text().splitlines()
    assert lines[0] == "pattern,seed,samples,aggregate,valid_flows,invalid_flows"
    assert lines[1].startswith("a2a,")
    assert detail.read_text().startswith("switch_uuid,port,srcs,dsts,risk")


def test_degrade_rejects_excess_amount(tmp_path, topo_file, capsys):
    rc = main([
        "degrade", "-i", str(topo_file), "--kind", "switches", "--amount", "16",
        "--seed", "1", "-o", str(tmp_path / "x.txt"),
    ])
    assert rc == 2
    assert "removable" in capsys.readouterr().err


def test_route_rejects_unroutable_without_flag(tmp_path, topo_file, capsys):
    t2 = tmp_path / "broken.txt"
    assert main([
        "degrade", "-i", str(topo_file), "--kind", "switches", "--amount", "10",
        "--seed", "1", "-o", str(t2),
    ]) == 0
    lft = tmp_path / "lft.txt"
    assert main(["route", "-i", str(t2), "-o", str(lft)]) == 2
    assert "unreachable leaf pair" in capsys.readouterr().err
    assert main(["route", "-i", str(t2), "--allow-invalid", "-o", str(lft)]) == 0
    assert " -1" in lft.read_text()


def test_analyze_rp_seeded(tmp_path, topo_file):
    lft = tmp_path / "lft.txt"
    assert main(["route", "-i", str(topo_file), "-o", str(lft)]) == 0
    out1, out2 = tmp_path / "r1.csv", tmp_path / "r2.csv"
    for out in (out1, out2):
        assert main([
            "analyze", "-i", str(topo_file), "--lft", str(lft), "--pattern", "rp",
            "--rp-samples", "5", "--seed", "3", "-o", str(out),
        ]) == 0
    assert out1.read_text() == out2.read_text()


def test_sweep_cli_reproducible(tmp_path, topo_file):
    outs = []
    for name in ("s1.csv", "s2.csv"):
        out = tmp_path / name
        assert main([
            "sweep", "-i", str(topo_file), "--max-exponent", "3", "--throws", "4",
            "--kind", "links", "--seed", "11", "--rp-samples", "3",
            "--parallel-throws", "2", "-o", str(out),
        ]) == 0
        outs.append(out.read_text())
    assert outs[0] == outs[1]
    assert outs[0].splitlines()[0] == (
        "throw,kind,amount,degrade_seed,algorithm,valid,a2a,rp,sp,threads"
    )


def test_bench_cli(tmp_path):
    out = tmp_path / "bench.csv"
    assert main([
        "bench", "--sizes", "4,4/1,2/1,1", "2,2/1,2/1,1", "--threads", "1,2",
        "--reps", "1", "-o", str(out),
    ]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 5
    # identical tables regardless of thread count
    assert lines[1].split(",")[-1] == lines[2].split(",")[-1]


def test_missing_file_is_clean_error(tmp_path, capsys):
    rc = main(["route", "-i", str(tmp_path / "nope.txt"), "-o", str(tmp_path / "x")])
    assert rc == 2
    assert "error:" in capsys.readouterr().err
