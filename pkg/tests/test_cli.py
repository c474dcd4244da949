import json

import pytest

from coordest.cli import main

from conftest import EXAMPLE_SEEDS


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def seeds_file(tmp_path):
    p = tmp_path / "seeds.json"
    p.write_text(json.dumps(EXAMPLE_SEEDS))
    return p


@pytest.fixture
def full_samples(tmp_path, example_csv, capsys):
    out = tmp_path / "full.jsonl"
    assert run(capsys, "sample", example_csv, "--scheme", "full", "-o", out)[0] == 0
    return out


def test_sample_with_injected_seeds_is_reproducible(capsys, example_csv, seeds_file):
    code, first, _ = run(capsys, "sample", example_csv, "--inject-seeds", seeds_file)
    assert code == 0
    _, second, _ = run(capsys, "sample", example_csv, "--inject-seeds", seeds_file)
    assert first == second
    rows = {r["key"]: r for r in map(json.loads, first.splitlines()[1:])}
    assert rows["a"]["sampled"] == {"1": 0.95}
    assert rows["d"]["sampled"] == {"1": 0.7, "2": 0.8}
    assert rows["h"]["sampled"] == {}


def test_sample_rejects_zero_rate(capsys, example_csv):
    code, _, err = run(capsys, "sample", example_csv, "--tau", "0")
    assert code == 2 and "positive" in err


def test_full_sample_gives_exact_queries(capsys, full_samples):
    def value(*extra):
        code, out, _ = run(capsys, "--json", "estimate", full_samples, "--instances", "1,2", *extra)
        assert code == 0
        return json.loads(out)["estimate"]

    assert value("--query", "lpp", "--p", 1, "--keys", "b,c,e") == pytest.approx(0.72)
    assert value("--query", "lpplus", "--p", 1, "--keys", "b,c,e") == pytest.approx(0.28)
    assert value("--query", "lpp", "--p", 2, "--keys", "c,f,h") == pytest.approx(0.1617)
    assert value("--query", "lp", "--p", 2, "--keys", "c,f,h") == pytest.approx(0.1617 ** 0.5)
    assert value("--query", "lpp", "--p", 1, "--keys", "zz") == 0.0


def test_estimate_text_and_flags(capsys, full_samples):
    code, out, _ = run(capsys, "estimate", full_samples, "--instances", "1,2", "--estimator", "ht", "--threads", 2)
    assert code == 0 and "ht estimate" in out
    code, _, err = run(capsys, "estimate", full_samples, "--instances", "1,9")
    assert code == 2 and "instances" in err


def test_estimate_ht_warns_on_zero_probability(capsys, tmp_path, example_csv):
    out = tmp_path / "s.jsonl"
    run(capsys, "sample", example_csv, "-o", out, "--salt", "w")
    code, text, _ = run(capsys, "--json", "estimate", out, "--instances", "1,2", "--estimator", "ht",
                        "--query", "lpplus")
    assert code == 0
    assert "ht_zero_probability_items" in json.loads(text) or json.loads(text)["estimate"] >= 0


def test_derive_tables(capsys, tmp_path):
    code, out, _ = run(capsys, "derive", "--breakpoints", "1/4,1/2,3/4", "--order", "ustar")
    assert code == 0
    row = next(ln for ln in out.splitlines() if ln.startswith("(2,<=1)"))
    assert row.split()[1] == "4"
    chains = tmp_path / "order.json"
    chains.write_text(json.dumps([[[3, 1], [3, 2], [3, 0]], [[2, 0], [2, 1]]]))
    dest = tmp_path / "table.json"
    code, out, _ = run(capsys, "--json", "derive", "--breakpoints", "1/4,1/2,3/4", "--order", chains, "-o", dest)
    assert code == 0
    cells = {(c["label"], c["interval"][1]): c["value"] for c in json.loads(dest.read_text())["cells"]}
    assert cells[("(3,<=0)", "1/4")] == "20/3"
    assert cells[("(3,2)", "1/2")] == "2/3"


def test_verify_passes(capsys):
    code, out, _ = run(capsys, "verify", "--function", "rgplus", "--p", 1, "--grid", 15)
    assert code == 0
    assert "max L* ratio" in out and out.strip().endswith("PASS")


def test_bench_tight(capsys):
    code, out, _ = run(capsys, "bench", "--family", "tight", "--p", 0.25)
    assert code == 0 and out.strip() == "(2.0000, 5.3333, 2.6667)"


def test_bench_tight_rejects_large_p(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["bench", "--family", "tight", "--p", "0.6"])
    assert exc.value.code == 2


def test_bench_aggregate_small(capsys):
    code, out, _ = run(capsys, "--json", "bench", "--family", "aggregate", "--items", 400, "--trials", 10,
                       "--sizes", "40,400")
    assert code == 0
    rows = json.loads(out)["rows"]
    assert [r["size"] for r in rows] == [40, 400]


def test_sample_many_rows(capsys, tmp_path):
    src = tmp_path / "big.csv"
    n = 20000
    src.write_text("key,v1,v2\n" + "".join(f"k{i},{(i % 97) / 97},{(i % 89) / 89}\n" for i in range(n)))
    dest = tmp_path / "big.jsonl"
    assert run(capsys, "sample", src, "-o", dest)[0] == 0
    assert len(dest.read_text().splitlines()) == n + 1
