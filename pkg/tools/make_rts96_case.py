#!/usr/bin/env python3
"""Emit cases/rts96_3area.m: a three-area reliability test system case.

Replicates the published single-area 24-bus reliability test system three
times (bus numbers offset by 100/200/300), joins the areas with the usual
six inter-area ties through the extra 230 kV bus 325, and writes the result
as a MATPOWER case text file.  73 buses, 120 branches, 99 generating units.

Linear costs approximate the published fuel merit order (hydro, nuclear,
coal, oil steam, oil CT).  Ramp data follows the published MW/min ratings,
capped at unit size, expressed as RAMP_10 (MW per 10 minutes).

Run from the repository root:  python3 tools/make_rts96_case.py
"""

from pathlib import Path

# bus number -> peak load MW (single area), 2850 MW total
LOADS = {
    1: 108, 2: 97, 3: 180, 4: 74, 5: 71, 6: 136, 7: 125, 8: 171,
    9: 175, 10: 195, 11: 0, 12: 0, 13: 265, 14: 194, 15: 317, 16: 100,
    17: 0, 18: 333, 19: 181, 20: 128, 21: 0, 22: 0, 23: 0, 24: 0,
}

# (from, to, r, x, rate MVA) single-area branch table, 38 entries
BRANCHES = [
    (1, 2, 0.0026, 0.0139, 175), (1, 3, 0.0546, 0.2112, 175),
    (1, 5, 0.0218, 0.0845, 175), (2, 4, 0.0328, 0.1267, 175),
    (2, 6, 0.0497, 0.1920, 175), (3, 9, 0.0308, 0.1190, 175),
    (3, 24, 0.0023, 0.0839, 400), (4, 9, 0.0268, 0.1037, 175),
    (5, 10, 0.0228, 0.0883, 175), (6, 10, 0.0139, 0.0605, 175),
    (7, 8, 0.0159, 0.0614, 175), (8, 9, 0.0427, 0.1651, 175),
    (8, 10, 0.0427, 0.1651, 175), (9, 11, 0.0023, 0.0839, 400),
    (9, 12, 0.0023, 0.0839, 400), (10, 11, 0.0023, 0.0839, 400),
    (10, 12, 0.0023, 0.0839, 400), (11, 13, 0.0061, 0.0476, 500),
    (11, 14, 0.0054, 0.0418, 500), (12, 13, 0.0061, 0.0476, 500),
    (12, 23, 0.0124, 0.0966, 500), (13, 23, 0.0111, 0.0865, 500),
    (14, 16, 0.0050, 0.0389, 500), (15, 16, 0.0022, 0.0173, 500),
    (15, 21, 0.0063, 0.0490, 500), (15, 21, 0.0063, 0.0490, 500),
    (15, 24, 0.0067, 0.0519, 500), (16, 17, 0.0033, 0.0259, 500),
    (16, 19, 0.0030, 0.0231, 500), (17, 18, 0.0018, 0.0144, 500),
    (17, 22, 0.0135, 0.1053, 500), (18, 21, 0.0033, 0.0259, 500),
    (18, 21, 0.0033, 0.0259, 500), (19, 20, 0.0051, 0.0396, 500),
    (19, 20, 0.0051, 0.0396, 500), (20, 23, 0.0028, 0.0216, 500),
    (20, 23, 0.0028, 0.0216, 500), (21, 22, 0.0087, 0.0678, 500),
]

# inter-area ties; bus 325 splits the area1-area3 230 kV corridor
TIES = [
    (107, 203, 0.0420, 0.1610, 175),
    (113, 215, 0.0100, 0.0750, 500),
    (123, 217, 0.0100, 0.0740, 500),
    (223, 318, 0.0130, 0.1040, 500),
    (121, 325, 0.0090, 0.0665, 500),
    (325, 318, 0.0030, 0.0255, 500),
]

# (bus, count, Pmax MW, cost $/MWh, ramp MW/min) single-area unit table
UNITS = [
    (1, 2, 20.0, 37.5, 3.0),    # oil CT
    (1, 2, 76.0, 13.0, 2.0),    # coal
    (2, 2, 20.0, 37.5, 3.0),
    (2, 2, 76.0, 13.0, 2.0),
    (7, 3, 100.0, 25.0, 7.0),   # oil steam
    (13, 3, 197.0, 20.5, 3.0),  # oil steam
    (14, 1, 0.0, 0.0, 0.0),     # synchronous condenser
    (15, 5, 12.0, 26.0, 1.0),   # oil steam, small
    (15, 1, 155.0, 11.5, 3.0),  # coal
    (16, 1, 155.0, 11.5, 3.0),
    (18, 1, 400.0, 5.5, 20.0),  # nuclear
    (21, 1, 400.0, 5.5, 20.0),
    (22, 6, 50.0, 0.5, 50.0),   # hydro
    (23, 2, 155.0, 11.5, 3.0),
    (23, 1, 350.0, 11.0, 4.0),  # coal, large
]


def main() -> None:
    bus_rows = []
    gen_rows = []
    cost_rows = []
    branch_rows = []

    for area in (1, 2, 3):
        off = 100 * area
        for bus in range(1, 25):
            num = off + bus
            bus_type = 3 if num == 113 else (2 if any(u[0] == bus for u in UNITS) else 1)
            pd = LOADS[bus]
            base_kv = 138.0 if bus <= 10 else 230.0
            bus_rows.append(
                f"\t{num}\t{bus_type}\t{pd}\t{pd * 0.2:.1f}\t0\t0\t{area}\t1.0\t0\t{base_kv}\t1\t1.05\t0.95;"
            )
        for f, t, r, x, rate in BRANCHES:
            branch_rows.append(
                f"\t{f + off}\t{t + off}\t{r}\t{x}\t0\t{rate}\t{rate}\t{rate}\t0\t0\t1\t-360\t360;"
            )
        for bus, count, p_max, cost, ramp in UNITS:
            ramp10 = min(10.0 * ramp, p_max)
            for _ in range(count):
                gen_rows.append(
                    f"\t{bus + off}\t{p_max / 2:.1f}\t0\t{p_max * 0.6:.1f}\t{-p_max * 0.3:.1f}"
                    f"\t1.0\t100\t1\t{p_max}\t0\t0\t0\t0\t0\t0\t0\t{ramp10}\t{ramp10}\t{ramp10}\t0\t0;"
                )
                cost_rows.append(f"\t2\t0\t0\t2\t{cost}\t0;")

    bus_rows.append("\t325\t1\t0\t0\t0\t0\t3\t1.0\t0\t230.0\t1\t1.05\t0.95;")
    for f, t, r, x, rate in TIES:
        branch_rows.append(
            f"\t{f}\t{t}\t{r}\t{x}\t0\t{rate}\t{rate}\t{rate}\t0\t0\t1\t-360\t360;"
        )

    text = "\n".join(
        [
            "function mpc = rts96_3area",
            "% Three-area 73-bus reliability test system, 120 branches, 99 units.",
            "% Generated by tools/make_rts96_case.py; linear costs follow fuel merit order.",
            "",
            "mpc.version = '2';",
            "mpc.baseMVA = 100;",
            "",
            "%% bus data",
            "%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin",
            "mpc.bus = [",
            *bus_rows,
            "];",
            "",
            "%% generator data",
            "%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin\tPc1\tPc2\tQc1min\tQc1max\tQc2min\tQc2max\tramp_agc\tramp_10\tramp_30\tramp_q\tapf",
            "mpc.gen = [",
            *gen_rows,
            "];",
            "",
            "%% branch data",
            "%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\tangmin\tangmax",
            "mpc.branch = [",
            *branch_rows,
            "];",
            "",
            "%% generator cost data (model 2, linear)",
            "mpc.gencost = [",
            *cost_rows,
            "];",
            "",
        ]
    )
    out = Path(__file__).resolve().parent.parent / "cases" / "rts96_3area.m"
    out.parent.mkdir(exist_ok=True)
    out.write_text(text)
    print(f"wrote {out}: {len(bus_rows)} buses, {len(branch_rows)} branches, {len(gen_rows)} units")


if __name__ == "__main__":
    main()
