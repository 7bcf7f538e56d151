import io
import os

import networkx as nx
import numpy as np
import pytest

from processing.errors import ConfigurationError, InvalidParameterError
from scripts.check_requirements import missing_requirements
from utils import topologies
from utils.animations.spinner import Spinner
from utils.config import Settings
from utils.file_io import dump_csv, dump_json, dump_json_lines, load_json, open_file, save_csv, save_json
from utils.seeding import STREAM_ROUTES, STREAM_TREES, DrawStream, derive_rng, derive_seed
from utils.split_work import split_evenly


def test_split_evenly():
    assert split_evenly(list(range(7)), 3) == [[0, 1, 2], [3, 4], [5, 6]]
    assert split_evenly(range(2), 4) == [[0], [1]]
    assert split_evenly([], 2) == []
    with pytest.raises(ValueError):
        split_evenly([1], 0)


def test_derived_seeds_are_stable_and_separate():
    assert derive_seed(7, STREAM_TREES, 3) == derive_seed(7, STREAM_TREES, 3)
    assert derive_seed(7, STREAM_TREES, 3) != derive_seed(7, STREAM_ROUTES, 3)
    assert derive_seed(7, STREAM_TREES, 3) != derive_seed(8, STREAM_TREES, 3)
    assert derive_rng(1, 2).random() == derive_rng(1, 2).random()
    with pytest.raises(InvalidParameterError):
        derive_seed(-1, 0)


def test_draw_stream_crosses_blocks():
    draws = DrawStream(np.random.default_rng(0), block=3)
    values = [draws.next() for _ in range(7)]
    assert values == np.random.default_rng(0).random(9).tolist()[:7]
    assert all(0 <= draws.index(5) < 5 for _ in range(50))


def test_settings_defaults(monkeypatch):
    monkeypatch.delenv("OVERLAY_SPECTRAL_PROBES", raising=False)
    monkeypatch.setenv("OVERLAY_COVER_CAP_FACTOR", "4.5")
    monkeypatch.setenv("OVERLAY_LOG_LEVEL", "info")
    settings = Settings.from_env(dotenv=False)
    assert settings.cover_cap_factor == 4.5
    assert settings.spectral_probes == 200
    assert settings.log_level == "INFO"


@pytest.mark.parametrize("name, value", [
    ("OVERLAY_BRUTEFORCE_CAP", "0"),
    ("OVERLAY_BRUTEFORCE_CAP", "many"),
    ("OVERLAY_EXTENSION_PROBABILITY", "1.5"),
    ("OVERLAY_LOG_LEVEL", "loud"),
])
def test_settings_reject_bad_values(monkeypatch, name, value):
    monkeypatch.setenv(name, value)
    with pytest.raises(ConfigurationError):
        Settings.from_env(dotenv=False)


def test_settings_read_dotenv(tmp_path, monkeypatch):
    # load_dotenv writes into os.environ, so give it a copy to write into
    monkeypatch.setattr(os, "environ", {k: v for k, v in os.environ.items() if not k.startswith("OVERLAY_")})
    monkeypatch.chdir(tmp_path)
    (tmp_path / ".env").write_text("OVERLAY_SPECTRAL_PROBES=17\n", encoding="utf-8")
    assert Settings.from_env().spectral_probes == 17


def test_file_helpers(tmp_path):
    target = tmp_path / "nested" / "report.json"
    save_json(target, {'b': 1, 'a': [1, 2]})
    assert open_file(target) == dump_json({'a': [1, 2], 'b': 1})
    assert load_json(target) == {'a': [1, 2], 'b': 1}
    assert dump_json_lines([{'y': 1, 'x': 2}]) == '{"x": 2, "y": 1}\n'
    assert dump_csv([{'a': 1, 'b': 2}]) == "a,b\n1,2\n"
    save_csv(tmp_path / "rows.csv", [{'a': 1, 'b': 2}], ['b'])
    assert open_file(tmp_path / "rows.csv") == "b\n2\n"


def test_topologies():
    ring = topologies.ring_with_chords(101, seed=2)
    assert ring.is_connected
    assert set(ring.degrees.tolist()) <= {2, 3}
    regular = topologies.random_regular(20, 3, seed=1)
    assert set(regular.degrees.tolist()) == {3}
    assert nx.is_connected(regular.nx_graph)
    weighted = topologies.complete(5, seed=3, max_capacity=4)
    assert all(1 <= w <= 4 for w in weighted.weights)
    assert topologies.generate('cycle', 6).edge_count == 6
    with pytest.raises(InvalidParameterError):
        topologies.generate('torus', 6)
    with pytest.raises(InvalidParameterError):
        topologies.random_regular(5, 3)


def test_spinner_stays_quiet_off_a_terminal():
    stream = io.StringIO()
    with Spinner("working", stream=stream) as spinner:
        spinner.update_message("still working")
    assert stream.getvalue() == ""
    assert spinner.message == "still working"
    assert not spinner.enabled


def test_missing_requirements():
    assert missing_requirements(["# comment\n", "\n", "pytest>=1.0\n"]) == []
    assert missing_requirements(["surely-not-installed-pkg==1.0\n"]) == ["surely-not-installed-pkg==1.0"]
