"""Report figures rendered next to the delimited outputs (Agg backend)."""

from __future__ import annotations

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

__all__ = ["render"]


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render(experiment: str, payload: dict, out_path) -> None:
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    if experiment == "sim":
        for label, vals in payload["hist"].items():
            ax.hist(vals, bins=40, alpha=0.6, label=label, density=True)
        ax.set_xlabel("log Z constrained")
        ax.set_ylabel("density")
        ax.legend(fontsize=8)
        ax.set_title("weak-coupling ensemble")
    elif experiment == "psi":
        for label, (t, v, vc) in payload["curves"].items():
            ax.plot(t, v, "-o", ms=3, label=f"free {label}")
            ax.plot(t, vc, "--s", ms=3, label=f"constr {label}")
        ax.set_xlabel("t")
        ax.set_ylabel("series value")
        ax.legend(fontsize=8)
        ax.set_title("continuum Psi series")
    elif experiment == "uconv":
        N, devf, devc = payload["N"], payload["dev_free"], payload["dev_con"]
        ax.loglog(N, devf, "-o", label="free")
        ax.loglog(N, devc, "-s", label="constrained")
        ax.set_xlabel("N")
        ax.set_ylabel("sup deviation")
        ax.legend()
        ax.set_title("discrete-to-continuum convergence")
    elif experiment == "cg-check":
        labels, devs = payload["labels"], payload["devs"]
        ax.bar(range(len(devs)), np.maximum(devs, 1e-18), log=True)
        ax.set_xticks(range(len(labels)), labels, rotation=30, fontsize=7)
        ax.axhline(1e-10, color="r", ls="--", lw=1)
        ax.set_ylabel("relative deviation")
        ax.set_title("coarse-grained identity (exact form)")
    elif experiment == "rege":
        for label, (g, p, slope) in payload["tails"].items():
            ax.loglog(g, p, "-o", ms=4, label=f"{label} slope {slope:.3f}")
        ax.set_xlabel("gamma")
        ax.set_ylabel("tail probability")
        ax.legend(fontsize=8)
        ax.set_title("regenerative-set block tails")
    elif experiment == "hc":
        b, hc = np.asarray(payload["beta"]), np.asarray(payload["h_c"])
        lo, hi = np.asarray(payload["lo"]), np.asarray(payload["hi"])
        ax.errorbar(b, hc, yerr=[hc - lo, hi - hc], fmt="o-")
        ax.set_xlabel("beta")
        ax.set_ylabel("h_c")
        ax.set_title("critical curve")
    elif experiment == "scan":
        b, hc = np.asarray(payload["beta"]), np.asarray(payload["h_c"])
        ax.loglog(b, hc, "o", label="h_c")
        bb = np.linspace(b.min(), b.max(), 50)
        slope, inter = payload["fit"]
        ax.loglog(bb, np.exp(inter) * bb**slope, "-",
                  label=f"fit slope {slope:.2f} (target {payload['target']:.2f})")
        ax.set_xlabel("beta")
        ax.set_ylabel("h_c")
        ax.legend()
        ax2 = ax.twinx()
        ax2.semilogx(b, payload["ratios"], "s--", color="gray", alpha=0.6)
        ax2.set_ylabel("h_c / (L~ beta^target)")
        ax.set_title("weak-coupling universality scan")
    elif experiment == "smoothing":
        h, F, bound = payload["h"], payload["F"], payload["bound"]
        ax.plot(h, F, "o-", label="F_N")
        ax.plot(h, bound, "r--", label="smoothing bound")
        ax.set_xlabel("h")
        ax.set_ylabel("free energy")
        ax.legend()
        ax.set_title(f"smoothing inequality (violations={payload['violations']})")
    elif experiment == "alpha-gt1":
        b, r = payload["beta"], payload["ratios"]
        ax.plot(b, r, "o-", label="h_c / beta^2")
        ax.axhline(payload["target"], color="r", ls="--", label="small-beta constant")
        ax.set_xlabel("beta")
        ax.set_ylabel("ratio")
        ax.legend()
        ax.set_title("alpha > 1 critical-curve constant")
    else:
        ax.text(0.5, 0.5, f"no figure for {experiment}", ha="center")
    _save(fig, out_path)
