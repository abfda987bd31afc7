"""Watch a long capture at two time scales at once.

A 20-minute synthetic trace whose rate and protocol mix follow a chaotic
driver is fed through the monitor: rules on every packet, a half-second
packet-count window with its false-neighbour curve, and a 5-second window
built from the first one's averaged output.  The report lands in
``monitor-report/``.
"""

import sys

from netphase import run_monitor
from netphase.monitor import FnnSettings, WindowConfig, WindowSpec, format_config, write_report
from netphase.params import ParamId
from netphase.rules import default_rules
from netphase.traffic import lorenz_capture

out = sys.argv[1] if len(sys.argv) > 1 else "monitor-report"

records = lorenz_capture(duration=1200.0)
config = WindowConfig((
    WindowSpec("fast", 0.5, params=(ParamId.IP_PROTO,), aggregation="count", boxcar=4, fnn=FnnSettings()),
    WindowSpec("slow", 5.0, params=(ParamId.IP_PROTO,), source="fast", fnn=FnnSettings(d_max=6)),
))
print("window config:\n" + format_config(config))

report = run_monitor(records, default_rules(), config)
print(f"counters: {report.counters}")
print(f"alerts: {len(report.alerts)}")
for w in report.windows:
    s = w.series[ParamId.IP_PROTO]
    print(f"\n[{w.name}] {len(s)} samples every {s.tau:g}s")
    if w.fnn is not None:
        print("  fnn " + " ".join(f"{f:.2f}" for f in w.fnn.fractions) + f"  estimate={w.dimension}")
    for e in w.errors:
        print("  note: " + e)

write_report(report, out)
print(f"\nreport written to {out}/")
