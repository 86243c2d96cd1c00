import pytest

from cannav.core.errors import ArtifactError
from cannav.schemas.artifact_schemas import ArtifactStamp
from cannav.services.artifact_service import ArtifactService
from cannav.services.plot_service import Curve, PlotService, load_curve


@pytest.fixture
def log_path(tmp_path):
    service = ArtifactService(tmp_path, ArtifactStamp(config_hash="h", seed=0, code_version="1.0.0"))
    return service.write_csv("run_a.csv", ["step", "sr"], [[100, 0.1], [200, "n/a"], [300, 0.6]])


def test_malformed_rows_are_skipped_and_counted(log_path):
    curve = load_curve(log_path)
    assert curve.label == "run_a"
    assert curve.steps == [100.0, 300.0]
    assert curve.sr == [0.1, 0.6]
    assert curve.skipped == 1


def test_log_without_columns(tmp_path):
    path = tmp_path / "other.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ArtifactError):
        load_curve(path)


def test_svg_output_is_deterministic(log_path, tmp_path):
    service = PlotService("Test")
    first, curves = service.plot([log_path], tmp_path / "one.svg")
    second, _ = service.plot([log_path], tmp_path / "two.svg")
    text = first.read_text()
    assert text.lstrip().startswith("<?xml")
    assert 'id="curve-0"' in text
    assert first.read_bytes() == second.read_bytes()
    assert curves[0].skipped == 1


def test_empty_curve_renders(tmp_path):
    out = PlotService().render([Curve(label="empty")], tmp_path / "empty.svg")
    assert out.exists()
