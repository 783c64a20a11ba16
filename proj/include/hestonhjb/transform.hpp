#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

#include "hestonhjb/model.hpp"

namespace hestonhjb {

struct Point2 {
    double y;
    double z;
};

// Two-stage change of variables: S = e^x removes the S dependence of the
// coefficients, then the shear
//     y = x - (rho/xi) v,   z = (sqrt(1-rho^2)/xi) v
// removes the mixed second derivative, leaving an isotropic diffusion.
// All PDE computation happens in (y,z); (S,v) exists only at input and
// output.
struct CoordinateMap {
    double rho;
    double xi;
    double shear;    // rho/xi
    double z_scale;  // sqrt(1-rho^2)/xi

    static CoordinateMap from_params(const HestonParams& p) {
        double zs = std::sqrt(1.0 - p.rho * p.rho) / p.xi;
        return {p.rho, p.xi, p.rho / p.xi, zs};
    }

    // dy/dz along lines of constant x; the slanted edges of the trapezoid.
    double edge_slope() const noexcept { return -shear / z_scale; }

    Point2 to_transformed(double S, double v) const {
        if (!(S > 0.0)) throw std::invalid_argument("S must be positive");
        if (!(v >= 0.0)) throw std::invalid_argument("v must be nonnegative");
        double x = std::log(S);
        return {x - shear * v, z_scale * v};
    }

    // Inverse map; z < 0 has no preimage.
    std::array<double, 2> from_transformed(double y, double z) const {
        if (z < 0.0) throw std::invalid_argument("z must be nonnegative");
        double v = z / z_scale;
        double S = std::exp(y + shear * v);
        return {S, v};
    }

    double x_of(double y, double z) const noexcept { return y + shear * z / z_scale; }

    // Delta dV/dS = (1/S) dw/dy since dV/dx = dw/dy and dV/dx = S dV/dS.
    double delta_from_gradient(double dw_dy, double S) const {
        if (!(S > 0.0)) throw std::invalid_argument("S must be positive");
        return dw_dy / S;
    }

    // Coefficient pair of d/dv in (y,z) coordinates:
    //   dV/dv = -(rho/xi) dw/dy + (sqrt(1-rho^2)/xi) dw/dz.
    // Drives the top boundary condition and Vega recovery.
    std::array<double, 2> vega_direction() const noexcept {
        return {-shear, z_scale};
    }
};

enum class BoundaryRegion { D, R1, R2, Rt };

// Image of the truncated (S,v) rectangle under the two-stage map: a
// trapezoid (in fact a parallelogram, both slanted edges share the slope
// -rho/sqrt(1-rho^2)). Corner order: bottom-left, bottom-right, top-right,
// top-left. Regions: D left slanted, R1 top, R2 right slanted, Rt bottom.
struct TrapezoidDomain {
    std::array<Point2, 4> corners;
    double x_min;  // log S_min
    double x_max;  // log S_max
    double z_max;

    double width() const noexcept { return x_max - x_min; }
    double area() const noexcept { return width() * z_max; }
};

inline TrapezoidDomain build_trapezoid(const TruncatedDomain& domain,
                                       const CoordinateMap& map) {
    Point2 bl = map.to_transformed(domain.s_min, 0.0);
    Point2 br = map.to_transformed(domain.s_max, 0.0);
    Point2 tr = map.to_transformed(domain.s_max, domain.v_max);
    Point2 tl = map.to_transformed(domain.s_min, domain.v_max);
    return {{bl, br, tr, tl}, std::log(domain.s_min), std::log(domain.s_max), tr.z};
}

}  // namespace hestonhjb
