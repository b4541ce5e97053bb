"""Recompute the high-precision reference values frozen into the test suite.

Every constant asserted in tests/ that is not a trivial identity was produced
by this script (mpmath, 50 significant digits) and hard-coded afterwards.
Run it to regenerate or audit those numbers:

    python scripts/oracle_values.py
"""

import mpmath as mp

mp.mp.dps = 50


def textbook_fault(im, theta, t1, f, t):
    """Decaying-DC fault current, term by term."""
    omega = 2 * mp.pi * f
    return im * (mp.cos(theta) * mp.e**(-t / t1) - mp.cos(omega * t + theta))


def damped_cosine_model(a, theta, b, lam, f, t):
    """Cosine-plus-decaying-DC model, term by term."""
    omega = 2 * mp.pi * f
    return a * mp.cos(omega * t + theta) + b * mp.e**(lam * t)


def magnetizing_current(im_sec, theta, t1, t2, f, t):
    """Linear-region magnetizing current (im_sec is secondary-referred)."""
    omega = 2 * mp.pi * f
    bracket = (
        -mp.sin(omega * t + theta)
        + mp.sin(theta) * mp.e**(-t / t2)
        + (omega * t1 * t2) / (t1 - t2) * mp.cos(theta)
        * (mp.e**(-t / t1) - mp.e**(-t / t2))
    )
    return im_sec / (omega * t2) * bracket


def transient_flux(lm, n_turns, im_sec, theta, t1, t2, f, t, phi_r):
    """Linear-region core flux derived from the magnetizing current."""
    return lm * magnetizing_current(im_sec, theta, t1, t2, f, t) / n_turns + phi_r


def show(label, value):
    print(f"{label} = {mp.nstr(value, 17)}")


if __name__ == "__main__":
    # waveform: textbook fault at Im=1000 A, theta=0, T1=0.1 s, f=50 Hz, t=10 ms
    show("eval_textbook_fault(1000, 0, 0.1, 50, 0.01)",
         textbook_fault(1000, 0, mp.mpf("0.1"), 50, mp.mpf("0.01")))

    # waveform: model at A=2, theta=pi/3, B=1, lambda=-20, f=50, t=7 ms
    show("eval_model(2, pi/3, 1, -20, 50, 0.007)",
         damped_cosine_model(2, mp.pi / 3, 1, -20, 50, mp.mpf("0.007")))

    # ct-sim mid-range point: Im=10 kA primary, ratio 400 -> im_sec = 25 A,
    # theta=pi/6, T1=0.1 s, T2=1.0 s, f=50, N=400, Lm=2-1e-5 H, phi_r=5e-4 Wb
    args = dict(theta=mp.pi / 6, t1=mp.mpf("0.1"), t2=mp.mpf("1.0"), f=50)
    show("closed_form_magnetizing(t=0.02)",
         magnetizing_current(im_sec=25, t=mp.mpf("0.02"), **args))
    show("closed_form_flux(t=0.02)",
         transient_flux(lm=mp.mpf("2") - mp.mpf("1e-5"), n_turns=400,
                        im_sec=25, t=mp.mpf("0.02"), phi_r=mp.mpf("5e-4"), **args))
