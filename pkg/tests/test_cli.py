import io
import json

from multifield.cli.commands import export_command, list_command, run_command, schema_command
from multifield.cli.main import build_parser, main


def write_scenario(path, **fields):
    document = {
        "name": "cli-run",
        "tasks": [{"kind": "distance-demo", "name": "cauchy", "demo": "cauchy-real-line", "n_max": 2, "h": 0.05}],
        **fields,
    }
    path.write_text(json.dumps(document))
    return path


class TestParser:
    def test_help_exits_cleanly(self, capsys):
        assert main(["--help"]) == 0
        assert "multifield" in capsys.readouterr().out

    def test_unknown_command(self):
        assert main(["bogus"]) == 1

    def test_export_needs_a_series(self):
        assert main(["export", "reports"]) == 1

    def test_run_arguments(self):
        args = build_parser().parse_args(["run", "noether-wave", "--seed", "3", "--strict"])
        assert (args.config, args.seed, args.strict, args.out) == ("noether-wave", 3, True, None)


class TestCommands:
    def test_list(self):
        stream = io.StringIO()
        assert list_command(stream=stream) == 0
        names = [line.split()[0] for line in stream.getvalue().splitlines()]
        assert names == sorted(names)
        assert "noether-wave" in names

    def test_schema(self):
        stream = io.StringIO()
        assert schema_command(stream=stream) == 0
        schema = json.loads(stream.getvalue())
        assert "tasks" in schema["properties"]

    def test_run_and_export(self, tmp_path):
        config = write_scenario(tmp_path / "run.json")
        stream = io.StringIO()
        assert run_command(str(config), out=str(tmp_path / "out"), stream=stream) == 0
        assert "cauchy" in stream.getvalue()

        exported = io.StringIO()
        assert export_command(str(tmp_path / "out"), "cauchy/cauchy", stream=exported) == 0
        assert exported.getvalue().splitlines()[0] == "n,m,distance,analytic_bound"

    def test_export_unknown_series(self, tmp_path, capsys):
        config = write_scenario(tmp_path / "run.json")
        run_command(str(config), out=str(tmp_path / "out"), stream=io.StringIO())
        assert export_command(str(tmp_path / "out"), "cauchy/energy", stream=io.StringIO()) == 1
        assert "SELECTOR_ERROR" in capsys.readouterr().err

    def test_run_missing_file(self, tmp_path):
        assert run_command(str(tmp_path / "absent.json"), stream=io.StringIO()) == 1

    def test_run_malformed_file(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{"name": ')
        assert run_command(str(path), stream=io.StringIO()) == 1

    def test_failed_acceptance_exits_two(self, tmp_path):
        config = write_scenario(tmp_path / "run.json", tasks=[{
            "kind": "distance-demo", "demo": "cauchy-real-line", "n_max": 2, "h": 0.05,
            "acceptance": {"max": {"pairs": 0}},
        }])
        assert main(["run", str(config), "--out", str(tmp_path / "out")]) == 2
