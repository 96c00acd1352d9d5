import csv
import os


def fmt(value):
    if isinstance(value, (bool,)):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    try:
        import numpy as np
        if isinstance(value, np.floating):
            return format(float(value), ".17g")
        if isinstance(value, np.bool_):
            return "true" if value else "false"
        if isinstance(value, np.integer):
            return str(int(value))
    except ImportError:  # pragma: no cover
        pass
    return str(value)


def write_csv(path, header, rows):
    """Header plus rows, 17 significant digits, LF line endings."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path
