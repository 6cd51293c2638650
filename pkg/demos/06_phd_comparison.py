"""Linear moment versus principal Hessian directions.

The linear moment sees odd links (bilinear) and is blind to even ones;
the second-moment pHd baseline is the reverse when each feature block is
handled on its own.
"""

from jointdr import default_config, run_experiment

for link in ("bilinear", "even"):
    res = run_experiment(default_config("phd_compare", link=link, trials=20, grid=(1000, 4000, 16000)))
    for name in res.series:
        print(f"{link:9s} {name:4s} slope {res.slopes[name].slope:+.3f}  mean NSEE {res.mean_nsee(name).round(3)}")
