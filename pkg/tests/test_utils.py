import json

import pytest

from utils import console
from utils.settings import DEFAULT_SETTINGS, Settings
from utils.worker_pool import chunked, run_tasks


def square(x):
    return x * x


def test_settings_defaults_when_missing(tmp_path):
    settings = Settings(str(tmp_path / "missing.json"))
    assert settings.settings == DEFAULT_SETTINGS


def test_settings_round_trip(tmp_path):
    path = tmp_path / "settings.json"
    settings = Settings(str(path))
    settings.set("lp_backend", "highs")
    settings.set("jobs", 4)
    assert settings.save_settings_file()
    assert json.loads(path.read_text(encoding="utf-8"))["jobs"] == 4
    assert Settings(str(path)).get("lp_backend") == "highs"


def test_settings_unknown_and_corrupt(tmp_path):
    path = tmp_path / "settings.json"
    path.write_text("{not json", encoding="utf-8")
    settings = Settings(str(path))
    assert settings.get("beta") == 1.1
    with pytest.raises(KeyError):
        settings.set("colour", "blue")
    path.write_text('{"beta": 1.5, "colour": "blue"}', encoding="utf-8")
    assert Settings(str(path)).settings == {**DEFAULT_SETTINGS, "beta": 1.5}


def test_override_and_env(tmp_path, monkeypatch):
    monkeypatch.setenv("UFLOW_SETTINGS", str(tmp_path / "env.json"))
    settings = Settings()
    assert settings.settings_path == str(tmp_path / "env.json")
    assert settings.get("k_paths", 3) == 3
    monkeypatch.delenv("UFLOW_OUT_DIR", raising=False)
    assert settings.output_dir() == "results"
    monkeypatch.setenv("UFLOW_OUT_DIR", "elsewhere")
    assert settings.output_dir() == "elsewhere"
    assert settings.output_dir("flag") == "flag"


@pytest.mark.parametrize("jobs", [1, 2])
def test_run_tasks_keeps_order(jobs):
    seen = []
    assert run_tasks(square, list(range(6)), jobs=jobs, callback=seen.append) == [0, 1, 4, 9, 16, 25]
    assert sorted(seen) == [0, 1, 4, 9, 16, 25]


def test_run_tasks_rejects_zero_jobs():
    with pytest.raises(ValueError):
        run_tasks(square, [1], jobs=0)


def test_chunked():
    assert chunked(range(5), 2) == [[0, 1], [2, 3], [4]]
    assert chunked([], 3) == []


def test_console_lines(capsys):
    console.success("done")
    console.error("broken")
    captured = capsys.readouterr()
    assert "✅ done" in captured.out
    assert "❌ broken" in captured.err


def test_emit_status_swallows_callback_errors():
    def broken(_):
        raise RuntimeError("boom")

    console.emit_status(broken, "hello")
    received = []
    console.emit_status(received.append, 3)
    assert received == ["3"]
