"""Train dual-channel and single-channel networks on blobs with distractors.

Five informative dimensions carry three classes; twenty more are noise.
The dual arm feeds two BDR components alongside the dense HD path.
"""

from dwl.experiments import BlobsTask, compare_channels

res = compare_channels(range(5), BlobsTask(), r=2)
print("seed  dual_epochs_to_95  single_epochs_to_95  dual_test  single_test")
for d, s in zip(res["dual"], res["single"]):
    print(f"{d.seed:4d}  {str(d.epochs_to_95):>17}  {str(s.epochs_to_95):>19}  "
          f"{d.test_accuracy:9.3f}  {s.test_accuracy:11.3f}")
print(f"median epochs to 95%: dual {res['dual_median_epochs']:g}, "
      f"single {res['single_median_epochs']:g}")
print(f"median test accuracy: dual {res['dual_median_test_acc']:.3f}, "
      f"single {res['single_median_test_acc']:.3f}")
