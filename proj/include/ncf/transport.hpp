#pragma once

#include <stdexcept>
#include <vector>

#include "ncf/cost.hpp"
#include "ncf/data.hpp"
#include "ncf/model.hpp"
#include "ncf/util.hpp"

namespace ncf {

enum class MapDirection { Forward, Backward };

/// One application of the characteristic-flow map in the training frame.
/// Forward rides the gradient at t=0 to the horizon, backward rides the
/// gradient at t=tf back to the start:
///   forward:  y = x + tf * grad_h(grad u(x, 0))
///   backward: x = y - tf * grad_h(grad u(y, tf))
inline void transport_point(const Potential& u, const CostModel& cost, MapDirection dir,
                            double tf, const double* in, double* out) {
    const int d = potential_dim(u);
    const double t = dir == MapDirection::Forward ? 0.0 : tf;
    const PointEval e = eval_potential(u, in, t);
    const std::vector<double> gh = cost.grad_h(e.grad_x);
    const double sign = dir == MapDirection::Forward ? 1.0 : -1.0;
    for (int k = 0; k < d; ++k) out[k] = in[k] + sign * tf * gh[static_cast<std::size_t>(k)];
}

/// Maps every row of `points` (n x d, training frame). Rows are independent,
/// so the loop is split across NCF_THREADS with per-row writes.
inline std::vector<double> transport_points(const Potential& u, const CostModel& cost,
                                            MapDirection dir, double tf,
                                            const std::vector<double>& points) {
    const int d = potential_dim(u);
    if (d < 1 || points.size() % static_cast<std::size_t>(d) != 0)
        throw std::invalid_argument("transport_points: row width mismatch");
    const std::size_t n = points.size() / static_cast<std::size_t>(d);
    std::vector<double> out(points.size());
    parallel_rows(n, [&](std::size_t i) {
        transport_point(u, cost, dir, tf, points.data() + i * static_cast<std::size_t>(d),
                        out.data() + i * static_cast<std::size_t>(d));
    });
    return out;
}

/// Pushes a raw-frame sample set through the map: into the source frame, map,
/// out of the target frame (or the reverse pair for backward transport).
/// Labels ride along unchanged.
inline SampleSet pushforward(const SampleSet& raw, const Potential& u, const CostModel& cost,
                             MapDirection dir, double tf, const Normalization& src_frame,
                             const Normalization& tgt_frame) {
    const int d = potential_dim(u);
    if (raw.dim != d) throw std::invalid_argument("pushforward: dimension mismatch");
    const Normalization& in_frame = dir == MapDirection::Forward ? src_frame : tgt_frame;
    const Normalization& out_frame = dir == MapDirection::Forward ? tgt_frame : src_frame;

    SampleSet out;
    out.dim = d;
    out.labels = raw.labels;
    out.norm = Normalization::identity(d);
    out.points.resize(raw.points.size());
    parallel_rows(raw.size(), [&](std::size_t i) {
        std::vector<double> frame_pt(static_cast<std::size_t>(d)), mapped(static_cast<std::size_t>(d));
        to_frame(in_frame, raw.row(i), frame_pt.data(), d);
        transport_point(u, cost, dir, tf, frame_pt.data(), mapped.data());
        from_frame(out_frame, mapped.data(), out.row(i), d);
    });
    return out;
}

/// Straight characteristic through x: position at interior time s in [0, tf].
inline std::vector<double> trajectory_point(const Potential& u, const CostModel& cost, double tf,
                                            const double* x, double s) {
    const int d = potential_dim(u);
    const PointEval e = eval_potential(u, x, 0.0);
    const std::vector<double> gh = cost.grad_h(e.grad_x);
    std::vector<double> out(static_cast<std::size_t>(d));
    for (int k = 0; k < d; ++k) out[static_cast<std::size_t>(k)] = x[k] + s * gh[static_cast<std::size_t>(k)];
    return out;
}

}  // namespace ncf
