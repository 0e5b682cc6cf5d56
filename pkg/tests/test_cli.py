import json

import pytest

from diffusions import EXIT_EXPECTATION_FAILED, EXIT_INPUT_ERROR, EXIT_OK, main


def run(capsys, *argv: str):
    code = main(list(argv))
    return code, capsys.readouterr().out


class TestExample:
    def test_prints_the_spec(self, capsys):
        code, out = run(capsys, "example", "brownian_line")
        assert code == EXIT_OK
        document = json.loads(out)
        assert document["name"] == "brownian_line"
        assert document["interval"]["hi"] == "inf"

    def test_writes_a_file_that_loads_back(self, capsys, tmp_path):
        file_path = tmp_path / "cantor.json"
        assert main(["example", "cantor_scale", "--output", str(file_path)]) == EXIT_OK
        code, out = run(capsys, "classify", str(file_path))
        assert code == EXIT_OK
        assert json.loads(out)["left"]["class"] == "first"


class TestVerdicts:
    """
    --expect turns a verdict into the exit code.
    """
    def test_classify_rational_windows(self, capsys):
        code, out = run(capsys, "classify", "rational_windows")
        report = json.loads(out)
        assert code == EXIT_OK
        assert report["right"]["class"] == "third"
        assert report["right"]["dissipative"] == "yes"
        assert report["conservative"] == "no"

    def test_classify_expectation(self, capsys):
        code, _ = run(capsys, "classify", "brownian_line", "--expect", "no")
        assert code == EXIT_EXPECTATION_FAILED

    def test_subspace(self, capsys):
        code, out = run(capsys, "subspace", "--sub", "brownian_01", "--sup", "cantor_scale", "--expect", "yes")
        assert code == EXIT_OK
        assert json.loads(out)["answer"] == "yes"

    def test_membership_fails_the_expectation(self, capsys):
        code, out = run(
            capsys, "membership", "brownian_01",
            "--function", "component:1", "--function-scale", "cantor_scale", "--expect", "yes",
        )
        assert code == EXIT_EXPECTATION_FAILED
        assert json.loads(out)["answer"] == "no"

    def test_energy(self, capsys):
        code, out = run(capsys, "energy", "cantor_scale", "--u", "scale")
        assert code == EXIT_OK
        assert json.loads(out)["energy"] == pytest.approx(2.0, abs=1e-6)


class TestSimulationCommands:
    def test_hitting_is_deterministic(self, capsys):
        argv = ["hitting", "brownian_line", "--a", "0", "--x", "0.25", "--b", "1",
                "--n", "200", "--seed", "5", "--step-h", "0.0625"]
        first_code, first = run(capsys, *argv)
        second_code, second = run(capsys, *argv)
        assert first == second
        assert first.splitlines()[0] == "spec_id,a,x,b,n,p_hat,ci,formula_p,pass"
        assert first_code == second_code

    def test_simulate_rows(self, capsys):
        code, out = run(capsys, "simulate", "brownian_01", "--a", "0", "--x0", "0.5", "--b", "1",
                        "--n", "5", "--seed", "1", "--step-h", "0.125")
        lines = out.splitlines()
        assert code == EXIT_OK
        assert lines[0] == "spec_id,path,terminal,lifetime,steps"
        assert len(lines) == 6

    def test_pretty_table(self, capsys):
        code, out = run(capsys, "survival", "brownian_01", "--x", "0.5", "--horizon", "0.25",
                        "--n", "20", "--seed", "2", "--step-h", "0.125", "--pretty")
        assert code == EXIT_OK
        assert out.splitlines()[0].split() == ["spec_id", "x", "horizon", "n", "fraction", "killed", "absorbed"]

    def test_seed_is_required(self):
        with pytest.raises(SystemExit):
            main(["hitting", "brownian_line", "--a", "0", "--x", "0.25", "--b", "1", "--n", "10"])


class TestInputErrors:
    def test_unknown_spec(self, capsys):
        code, _ = run(capsys, "classify", "no/such/spec.json")
        assert code == EXIT_INPUT_ERROR

    def test_window_outside_of_the_interval(self, capsys):
        code, _ = run(capsys, "hitting", "brownian_01", "--a", "0", "--x", "0.5", "--b", "3",
                      "--n", "10", "--seed", "1")
        assert code == EXIT_INPUT_ERROR

    def test_chain_check(self, capsys, tmp_path):
        file_path = tmp_path / "chain.json"
        file_path.write_text(json.dumps({"version": 1, "rates": [[0.0, 2.0], [1.0, 0.0]]}), encoding="utf-8")
        code, out = run(capsys, "chain-check", str(file_path), "--alpha", "1", "--expect", "yes")
        report = json.loads(out)
        assert code == EXIT_OK
        assert report["symmetrizing_cone"]["dimension"] == 1
        assert report["resolvent"]["irreducible"] is True
