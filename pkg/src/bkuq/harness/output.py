"""CSV, manifest and plot-script emission."""
from __future__ import annotations

import json
import logging
from pathlib import Path
import subprocess

import numpy as np

log = logging.getLogger(__name__)


class OutputError(OSError):
    pass


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows, n_keys=1):
    """Write rows sorted by their first ``n_keys`` columns; header-only if empty."""
    rows = sorted((tuple(r) for r in rows), key=lambda r: r[:n_keys])
    path = Path(path)
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write(",".join(header) + "\n")
            for r in rows:
                fh.write(",".join(_fmt(v) for v in r) + "\n")
    except OSError as e:
        raise OutputError(f"cannot write {path}: {e}") from e
    return path


def version_string():
    """git-describe style version when run from a checkout, else the package version."""
    from .. import __version__
    try:
        here = Path(__file__).resolve().parent
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"],
                             cwd=here, capture_output=True, text=True, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def write_manifest(path, cfg, scenario, wall_time, files, extra=None):
    data = {"scenario": scenario, "version": version_string(), "wall_time_s": wall_time,
            "config": cfg, "files": sorted(files)}
    if extra:
        data["summary"] = extra
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    return str(v)


# --------------------------------------------------------------- plot text

GNUPLOT = {
    "spectrum": """# gnuplot script: fluid branches and gap sweep
set datafile separator ','
set terminal pngcairo size 900,600
set output 'spectrum_re.png'
set xlabel 'eta'; set ylabel 'Re sigma'
plot for [j=0:2] 'spectrum.csv' using ($2==j ? $1 : 1/0):3 with linespoints title sprintf('branch %d', j)
set output 'spectrum_im.png'
set ylabel 'Im sigma'
plot for [j=0:2] 'spectrum.csv' using ($2==j ? $1 : 1/0):4 with linespoints title sprintf('branch %d', j)
set output 'gap.png'
set ylabel 'max Re sigma (non-fluid below delta)'
plot 'gap.csv' using 1:2 with lines title 'sampled gap'
""",
    "decay": """# gnuplot script: decay of weighted norms
set datafile separator ','
set terminal pngcairo size 900,600
set logscale xy
set xlabel '1+t'; set ylabel 'norm'
set output 'decay_L2.png'
plot for [s=0:2] 'decay.csv' using ($2==s && $5==0 ? 1+$1 : 1/0):3 with linespoints title sprintf('order %d, L2_x', s)
set output 'decay_Linf.png'
plot for [s=0:2] 'decay.csv' using ($2==s && $5==0 ? 1+$1 : 1/0):4 with linespoints title sprintf('order %d, Linf_x', s)
""",
    "gap-certify": """# gnuplot script: coupled gap bound versus K
set datafile separator ','
set terminal pngcairo size 900,600
set output 'gap_certificate.png'
set xlabel 'K'; set ylabel 'bound'
plot 'gap_certificate.csv' using 3:4 with points title 'bound', '' using 3:(-$5) with points title '-max Rayleigh'
""",
    "gpc-converge": """# gnuplot script: gPC error versus K
set datafile separator ','
set terminal pngcairo size 900,600
set logscale y
set xlabel 'K'; set ylabel 'error'
set output 'convergence.png'
plot 'convergence.csv' using 1:3 with points title 'total L2_x', '' using 1:5 with points title 'projection', '' using 1:6 with points title 'numerical'
""",
    "validate": """# gnuplot script: validation checks (pass = 1)
set datafile separator ','
set terminal pngcairo size 900,600
set output 'validate.png'
set style data histograms
plot 'validate.csv' using 4:xtic(1) title 'passed'
""",
}


def write_plot_script(outdir, scenario):
    p = Path(outdir) / f"{scenario.replace('-', '_')}.gp"
    p.write_text(GNUPLOT[scenario])
    return p
