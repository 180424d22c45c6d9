import itertools

import pytest

from app.adapters.json_adapter import bdt_to_dict, load_distance_matrix, read_json, save_bdt, save_field
from app.cli.runner import build_parser, run
from tests.factories import make_bdt, random_bdt, single

RAW_FLAGS = ["--eps1", "0", "--eps2", "0", "--eps3", "0", "--no-normalize"]


@pytest.fixture
def members(tmp_path):
    folder = tmp_path / "members"
    folder.mkdir()
    for name, death in (("a", 1.0), ("b", 1.1), ("c", 5.0), ("d", 5.1)):
        save_bdt(single(death), folder / f"{name}.bdt.json")
    return folder


class TestDistance:
    def test_identical_files(self, tmp_path, rng, capsys):
        bdt = random_bdt(rng, 6)
        first = save_bdt(bdt, tmp_path / "a.bdt.json")
        second = save_bdt(bdt, tmp_path / "b.bdt.json")
        assert run(["distance", str(first), str(second)]) == 0
        assert capsys.readouterr().out == "0.0\n"

    def test_matching_document(self, tmp_path, capsys):
        first = save_bdt(make_bdt([(0, 10, None), (2, 6, 0)]), tmp_path / "a.bdt.json")
        second = save_bdt(single(10.0), tmp_path / "b.bdt.json")
        out = tmp_path / "matching.json"
        assert run(["distance", str(first), str(second), *RAW_FLAGS, "-o", str(out)]) == 0
        payload = read_json(out)
        assert payload["destroyed"] == [1]
        assert payload["params"]["metric"] == "W^T_2"
        assert float(capsys.readouterr().out) == pytest.approx(8.0**0.5)

    def test_matrix_of_a_directory(self, members, tmp_path, capsys):
        assert run(["distance", str(members), *RAW_FLAGS]) == 0
        rows = capsys.readouterr().out.strip().splitlines()
        assert len(rows) == 4
        assert float(rows[0].split(",")[2]) == pytest.approx(4.0)

        out = tmp_path / "matrix.csv"
        assert run(["distance", str(members), *RAW_FLAGS, "-o", str(out)]) == 0
        names, matrix = load_distance_matrix(out)
        assert names == ["a.bdt.json", "b.bdt.json", "c.bdt.json", "d.bdt.json"]
        assert matrix[1, 3] == pytest.approx(4.0)


class TestCommands:
    def test_tree(self, tmp_path, ramp_field):
        field_file = save_field(ramp_field, tmp_path / "ramp.field.json")
        out = tmp_path / "tree.json"
        assert run(["tree", str(field_file), "--kind", "join", "--simplify", "0", "-o", str(out)]) == 0
        payload = read_json(out)
        assert payload["kind"] == "join"
        assert len(payload["bdt"]["branches"]) == 3
        assert len(payload["diagram"]["pairs"]) == 3

    def test_geodesic_starts_at_the_first_input(self, tmp_path, rng):
        bdt_a, bdt_b = random_bdt(rng, 5), random_bdt(rng, 4)
        first = save_bdt(bdt_a, tmp_path / "a.bdt.json")
        second = save_bdt(bdt_b, tmp_path / "b.bdt.json")
        out = tmp_path / "geodesic.json"
        assert run(["geodesic", str(first), str(second), "--alpha", "0,0.5,1", "-o", str(out)]) == 0
        payload = read_json(out)
        assert [item["alpha"] for item in payload["items"]] == [0.0, 0.5, 1.0]
        assert payload["items"][0]["bdt"] == bdt_to_dict(bdt_a)
        assert payload["items"][2]["bdt"] == bdt_to_dict(bdt_b)

    def test_barycenter_of_a_directory(self, members, tmp_path):
        out = tmp_path / "barycenter.json"
        assert run(["barycenter", str(members), "--weights", "uniform", "-o", str(out)]) == 0
        payload = read_json(out)
        assert payload["members"] == ["a.bdt.json", "b.bdt.json", "c.bdt.json", "d.bdt.json"]
        assert payload["weights"] == [0.25] * 4
        trace = payload["energy_trace"]
        assert all(b <= a for a, b in itertools.pairwise(trace))
        for previous, current in itertools.pairwise(trace[:-1]):
            assert (previous - current) / previous >= 0.01

    def test_cluster_with_scores(self, members, tmp_path):
        out = tmp_path / "clusters.json"
        assert run(["cluster", str(members), "-k", "2", "--labels", "0,0,1,1", "--seed", "5", "-o", str(out)]) == 0
        payload = read_json(out)
        assert payload["nmi"] == pytest.approx(1.0)
        assert payload["ari"] == pytest.approx(1.0)
        assert payload["seed"] == 5

    def test_reduce_and_track(self, tmp_path, capsys):
        frames = tmp_path / "frames"
        frames.mkdir()
        for index, death in enumerate((2.0, 4.0, 6.0)):
            save_bdt(single(death), frames / f"t{index}.json")

        assert run(["reduce", str(frames), "--target", "2", *RAW_FLAGS, "-o", str(tmp_path / "reduce.json")]) == 0
        assert read_json(tmp_path / "reduce.json")["kept"] == [0, 2]

        assert run(["track", str(frames), *RAW_FLAGS]) == 0
        tracked = capsys.readouterr().out
        assert '"frames"' in tracked
        assert tracked.count('"matched"') == 2

    def test_stability(self, tmp_path, two_bump_field):
        field_file = save_field(two_bump_field, tmp_path / "bumps.field.json")
        out = tmp_path / "stability.json"
        args = ["stability", str(field_file), "--amplitudes", "0,0.05", "--eps1-values", "0", "-o", str(out)]
        assert run(args) == 0
        payload = read_json(out)
        assert [row["amplitude"] for row in payload["items"]] == [0.0, 0.05]
        assert payload["items"][0]["tree_distance"] == 0.0

    def test_stability_on_the_built_in_field(self, tmp_path):
        out = tmp_path / "stability.json"
        flags = ["--eps2", "0", "--eps3", "0", "--no-normalize", "--seed", "11"]
        args = ["stability", "--amplitudes", "0.01,0.02,0.05", "--eps1-values", "0,0.05", *flags, "-o", str(out)]
        assert run(args) == 0
        payload = read_json(out)
        assert payload["inputs"] == []
        assert payload["transitions"] == [{"eps1": 0.0, "amplitude": 0.01}, {"eps1": 0.05, "amplitude": None}]


class TestExitCodes:
    def test_unknown_flag(self, members):
        assert run(["distance", str(members), "--frobnicate"]) == 2

    def test_missing_subcommand(self):
        assert run([]) == 2

    def test_bad_list_argument(self, members):
        assert run(["barycenter", str(members), "--weights", "half,half"]) == 2

    def test_help(self, capsys):
        assert run(["--help"]) == 0
        assert "barycenter" in capsys.readouterr().out

    def test_domain_errors(self, tmp_path):
        leaking = save_bdt(make_bdt([(0, 10, None), (2, 12, 0)]), tmp_path / "leaking.bdt.json")
        fine = save_bdt(single(10.0), tmp_path / "fine.bdt.json")
        assert run(["distance", str(leaking), str(fine)]) == 1
        assert run(["distance", str(tmp_path / "missing.json"), str(fine)]) == 1
        assert run(["barycenter", str(fine), "--weights", "0.3"]) == 1


@pytest.mark.parametrize(
    "argv",
    [
        ["tree", "f.json"],
        ["distance", "a.json", "b.json"],
        ["geodesic", "a.json", "b.json"],
        ["barycenter", "members"],
        ["cluster", "members", "-k", "2"],
        ["reduce", "frames", "--target", "3"],
        ["track", "frames"],
        ["stability", "f.json"],
    ],
)
def test_every_subcommand_is_registered(argv):
    args = build_parser().parse_args(argv)
    assert args.command == argv[0]
    assert callable(args.handler)
