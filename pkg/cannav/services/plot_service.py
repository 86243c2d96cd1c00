"""SR-versus-steps curves rendered as standalone SVG."""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from cannav.core.errors import ArtifactError  # noqa: E402
from cannav.services.artifact_service import read_csv  # noqa: E402

logger = logging.getLogger(__name__)


@dataclass
class Curve:
    label: str
    steps: List[float] = field(default_factory=list)
    sr: List[float] = field(default_factory=list)
    skipped: int = 0


def load_curve(path: Union[str, Path], x_column: str = "step", y_column: str = "sr") -> Curve:
    """Read one log; rows that do not parse are skipped and counted."""
    path = Path(path)
    header, rows = read_csv(path)
    if x_column not in header or y_column not in header:
        raise ArtifactError(f"Log {path} lacks '{x_column}'/'{y_column}' columns")
    curve = Curve(label=path.stem)
    for row in rows:
        try:
            x, y = float(row[x_column]), float(row[y_column])
        except (KeyError, TypeError, ValueError):
            curve.skipped += 1
            continue
        curve.steps.append(x)
        curve.sr.append(y)
    if curve.skipped:
        logger.warning(f"Skipped {curve.skipped} malformed rows in {path}")
    return curve


class PlotService:
    def __init__(self, title: str = "Success rate during training"):
        self.title = title

    def render(self, curves: Sequence[Curve], output: Union[str, Path]) -> Path:
        output = Path(output)
        with plt.rc_context({"svg.hashsalt": "cannav", "path.simplify": False, "svg.fonttype": "none"}):
            fig, ax = plt.subplots(figsize=(6, 4))
            for i, curve in enumerate(curves):
                (line,) = ax.plot(curve.steps, curve.sr, marker="o", markersize=3, label=curve.label)
                line.set_gid(f"curve-{i}")
            ax.set_xlabel("environment steps")
            ax.set_ylabel("success rate")
            ax.set_ylim(-0.02, 1.02)
            ax.set_title(self.title)
            if curves:
                ax.legend(loc="lower right", fontsize=8)
            fig.tight_layout()
            try:
                output.parent.mkdir(parents=True, exist_ok=True)
                fig.savefig(output, format="svg", metadata={"Date": None})
            except OSError as e:
                raise ArtifactError(f"Failed to write plot {output}: {e}") from e
            finally:
                plt.close(fig)
        logger.info(f"Plot written: {output}")
        return output

    def plot(self, log_paths: Sequence[Union[str, Path]], output: Union[str, Path]) -> Tuple[Path, List[Curve]]:
        curves = [load_curve(p) for p in log_paths]
        return self.render(curves, output), curves
