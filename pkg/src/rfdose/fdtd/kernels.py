"""Numba kernels for the Yee leapfrog with CPML auxiliary fields.

Index convention (all field arrays have the cell-count shape (nx, ny, nz)):

    Ex[i,j,k] @ (i+1/2, j, k)      Hx[i,j,k] @ (i, j+1/2, k+1/2)
    Ey[i,j,k] @ (i, j+1/2, k)      Hy[i,j,k] @ (i+1/2, j, k+1/2)
    Ez[i,j,k] @ (i, j, k+1/2)      Hz[i,j,k] @ (i+1/2, j+1/2, k)

Non-periodic axes end in PEC walls at node 0 and node n (tangential E at
node 0 is never updated; E at node n is identically zero).  Periodic axes
wrap.  Each cell is written by exactly one iteration, so results do not
depend on the number of threads.
"""

import numpy as np
from numba import njit, prange


@njit(parallel=True, cache=True)
def update_h(ex, ey, ez, hx, hy, hz, ch, per,
             ikx, iky, ikz, mx, my, mz, bx, cx, by, cy, bz, cz,
             psi_hxy, psi_hxz, psi_hyx, psi_hyz, psi_hzx, psi_hzy):
    nx, ny, nz = ex.shape
    for i in prange(nx):
        ip = i + 1
        xin = ip < nx or per[0]
        if ip == nx:
            ip = 0
        for j in range(ny):
            jp = j + 1
            yin = jp < ny or per[1]
            if jp == ny:
                jp = 0
            for k in range(nz):
                kp = k + 1
                zin = kp < nz or per[2]
                if kp == nz:
                    kp = 0
                ex0 = ex[i, j, k]
                ey0 = ey[i, j, k]
                ez0 = ez[i, j, k]
                dez_dy = (ez[i, jp, k] if yin else 0.0) - ez0
                dey_dz = (ey[i, j, kp] if zin else 0.0) - ey0
                dex_dz = (ex[i, j, kp] if zin else 0.0) - ex0
                dez_dx = (ez[ip, j, k] if xin else 0.0) - ez0
                dey_dx = (ey[ip, j, k] if xin else 0.0) - ey0
                dex_dy = (ex[i, jp, k] if yin else 0.0) - ex0

                ty = dez_dy * iky[j]
                tz = dey_dz * ikz[k]
                s = my[j]
                if s >= 0:
                    psi_hxy[i, s, k] = by[s] * psi_hxy[i, s, k] + cy[s] * dez_dy
                    ty += psi_hxy[i, s, k]
                s = mz[k]
                if s >= 0:
                    psi_hxz[i, j, s] = bz[s] * psi_hxz[i, j, s] + cz[s] * dey_dz
                    tz += psi_hxz[i, j, s]
                hx[i, j, k] -= ch * (ty - tz)

                tz = dex_dz * ikz[k]
                tx = dez_dx * ikx[i]
                s = mz[k]
                if s >= 0:
                    psi_hyz[i, j, s] = bz[s] * psi_hyz[i, j, s] + cz[s] * dex_dz
                    tz += psi_hyz[i, j, s]
                s = mx[i]
                if s >= 0:
                    psi_hyx[s, j, k] = bx[s] * psi_hyx[s, j, k] + cx[s] * dez_dx
                    tx += psi_hyx[s, j, k]
                hy[i, j, k] -= ch * (tz - tx)

                tx = dey_dx * ikx[i]
                ty = dex_dy * iky[j]
                s = mx[i]
                if s >= 0:
                    psi_hzx[s, j, k] = bx[s] * psi_hzx[s, j, k] + cx[s] * dey_dx
                    tx += psi_hzx[s, j, k]
                s = my[j]
                if s >= 0:
                    psi_hzy[i, s, k] = by[s] * psi_hzy[i, s, k] + cy[s] * dex_dy
                    ty += psi_hzy[i, s, k]
                hz[i, j, k] -= ch * (tx - ty)


@njit(parallel=True, cache=True)
def update_e(ex, ey, ez, hx, hy, hz, ca_x, cb_x, ca_y, cb_y, ca_z, cb_z, per,
             ikx, iky, ikz, mx, my, mz, bx, cx, by, cy, bz, cz,
             psi_exy, psi_exz, psi_eyx, psi_eyz, psi_ezx, psi_ezy):
    nx, ny, nz = ex.shape
    for i in prange(nx):
        im = i - 1
        if im < 0:
            im = nx - 1
        xwall = i == 0 and not per[0]
        for j in range(ny):
            jm = j - 1
            if jm < 0:
                jm = ny - 1
            ywall = j == 0 and not per[1]
            for k in range(nz):
                km = k - 1
                if km < 0:
                    km = nz - 1
                zwall = k == 0 and not per[2]
                hx0 = hx[i, j, k]
                hy0 = hy[i, j, k]
                hz0 = hz[i, j, k]

                if not (ywall or zwall):
                    dhz_dy = hz0 - hz[i, jm, k]
                    dhy_dz = hy0 - hy[i, j, km]
                    ty = dhz_dy * iky[j]
                    tz = dhy_dz * ikz[k]
                    s = my[j]
                    if s >= 0:
                        psi_exy[i, s, k] = by[s] * psi_exy[i, s, k] + cy[s] * dhz_dy
                        ty += psi_exy[i, s, k]
                    s = mz[k]
                    if s >= 0:
                        psi_exz[i, j, s] = bz[s] * psi_exz[i, j, s] + cz[s] * dhy_dz
                        tz += psi_exz[i, j, s]
                    ex[i, j, k] = ca_x[i, j, k] * ex[i, j, k] + cb_x[i, j, k] * (ty - tz)

                if not (xwall or zwall):
                    dhx_dz = hx0 - hx[i, j, km]
                    dhz_dx = hz0 - hz[im, j, k]
                    tz = dhx_dz * ikz[k]
                    tx = dhz_dx * ikx[i]
                    s = mz[k]
                    if s >= 0:
                        psi_eyz[i, j, s] = bz[s] * psi_eyz[i, j, s] + cz[s] * dhx_dz
                        tz += psi_eyz[i, j, s]
                    s = mx[i]
                    if s >= 0:
                        psi_eyx[s, j, k] = bx[s] * psi_eyx[s, j, k] + cx[s] * dhz_dx
                        tx += psi_eyx[s, j, k]
                    ey[i, j, k] = ca_y[i, j, k] * ey[i, j, k] + cb_y[i, j, k] * (tz - tx)

                if not (xwall or ywall):
                    dhy_dx = hy0 - hy[im, j, k]
                    dhx_dy = hx0 - hx[i, jm, k]
                    tx = dhy_dx * ikx[i]
                    ty = dhx_dy * iky[j]
                    s = mx[i]
                    if s >= 0:
                        psi_ezx[s, j, k] = bx[s] * psi_ezx[s, j, k] + cx[s] * dhy_dx
                        tx += psi_ezx[s, j, k]
                    s = my[j]
                    if s >= 0:
                        psi_ezy[i, s, k] = by[s] * psi_ezy[i, s, k] + cy[s] * dhx_dy
                        ty += psi_ezy[i, s, k]
                    ez[i, j, k] = ca_z[i, j, k] * ez[i, j, k] + cb_z[i, j, k] * (tx - ty)


@njit(parallel=True, cache=True)
def accumulate(acc, field, wr, wi):
    """acc += field * (wr + 1j*wi) for a complex accumulator."""
    nx, ny, nz = field.shape
    for i in prange(nx):
        for j in range(ny):
            for k in range(nz):
                f = field[i, j, k]
                acc[i, j, k] += complex(f * wr, f * wi)


@njit(cache=True)
def all_finite(a):
    for v in a.ravel():
        if not np.isfinite(v):
            return False
    return True
