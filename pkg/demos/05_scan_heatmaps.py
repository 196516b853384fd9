"""Grid scan of first-order controllers and the degenerate line.

Scans a coarse (A_K, B_K, D_K) grid with C_K = 1, writes the CSV and one
ln|P12| heatmap per D_K slice, and fits a line through the origin to the
lowest values in each slice. Pass an output directory as the first
argument (default ./scan_out).
"""
import os
import sys

from hinfland import example_plant
from hinfland.scan import ScanConfig, emit_csv, emit_svg_heatmap, fit_degenerate_line, run_scan, slices

out = sys.argv[1] if len(sys.argv) > 1 else "scan_out"
os.makedirs(out, exist_ok=True)

cfg = ScanConfig(counts=(21, 21, 5))
records = list(run_scan(example_plant(), cfg))
emit_csv(records, os.path.join(out, "scan.csv"))
n_stab = sum(r.stabilizing for r in records)
n_cert = sum(r.stabilizing and r.error is None for r in records)
print(f"{len(records)} points, {n_stab} stabilizing, {n_cert} certified")

for i, (d, sl) in enumerate(slices(records).items()):
    emit_svg_heatmap(sl, "ln_abs_p12", os.path.join(out, f"slice_{i}.svg"), title=f"D_K = {d:g}")
    f = fit_degenerate_line(sl, 0.05, cfg.ck)
    print(f"D_K = {d:5.2f}: theta = {f.theta:+.3f} rad, max distance {f.max_perp_dist:.3f}, {f.n_low} points")
print("written to", out)
