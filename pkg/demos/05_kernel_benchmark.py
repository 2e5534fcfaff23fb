"""Wall-clock comparison of the three pseudo-label kernels.

The closed-form update costs a single vectorized pass, like plain masked
renormalization; the iterative scaling baseline pays per iteration. Run
on a few batch/class sizes and printed as a small table.
"""

from plrlab import bench_pseudo
from plrlab.core import Rng

print(f"{'method':10s} {'batch':>6s} {'classes':>8s} {'mean ms':>9s} {'std ms':>8s}")
rng = Rng(0)
for classes in (10, 100):
    for batch in (256,):
        records = bench_pseudo(["proden", "plr", "sinkhorn"], batch, classes,
                               reps=10, rng=rng.child(classes))
        for rec in records:
            print(f"{rec.method:10s} {rec.batch_size:6d} {rec.n_classes:8d} "
                  f"{rec.mean_s * 1e3:9.3f} {rec.std_s * 1e3:8.3f}")
        ratio = records[2].mean_s / records[1].mean_s
        print(f"{'':10s} scaling baseline / closed form: {ratio:.0f}x")
