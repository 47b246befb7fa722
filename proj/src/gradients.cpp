#include "splat/gradients.hpp"

#include <cmath>
#include <string>

#include "splat/errors.hpp"

namespace splat {

namespace {

// dR/dq for a unit quaternion (w, x, y, z); index order matches Vec4.
void rotation_quat_jacobian(const Quat& q, Mat3 out[4]) {
    const double w = q.w, x = q.x, y = q.y, z = q.z;
    out[0] = Mat3{0, -z, y, z, 0, -x, -y, x, 0} * 2.0;
    out[1] = Mat3{0, y, z, y, -2 * x, -w, z, w, -2 * x} * 2.0;
    out[2] = Mat3{-2 * y, x, w, x, 0, z, -w, z, -2 * y} * 2.0;
    out[3] = Mat3{-2 * z, -w, x, w, -2 * z, y, x, y, 0} * 2.0;
}

struct SplatAccum {
    Vec3 color;
    double depth = 0;
    double opacity = 0;
    Vec2 mean2d;
    Mat2 inv_cov;  // gradient w.r.t. the (full) inverse covariance entries
    bool touched = false;
};

}  // namespace

void ParamGrads::resize(const GaussianCloud& cloud) {
    const size_t n = cloud.size();
    position.assign(n, Vec3());
    rotation.assign(n, Vec4());
    log_scale.assign(n, Vec3());
    opacity_logit.assign(n, 0.0);
    sh.assign(n, std::vector<Vec3>(sh_coeff_count(cloud.sh_degree)));
    pos2d_norm.assign(n, 0.0);
    visible.assign(n, 0);
}

ParamGrads backward_render(const GaussianCloud& cloud, const Camera& cam,
                           const RenderedFrame& frame, const Image& dL_dcolor,
                           const Image& dL_ddepth) {
    if (dL_dcolor.width != cam.width || dL_dcolor.height != cam.height || dL_dcolor.channels != 3)
        fail(ErrorCode::shape_mismatch, "backward_render: dL/dcolor shape mismatch");
    if (dL_ddepth.width != cam.width || dL_ddepth.height != cam.height || dL_ddepth.channels != 1)
        fail(ErrorCode::shape_mismatch, "backward_render: dL/ddepth shape mismatch");
    if (frame.contributors.empty() && !frame.splats.empty())
        fail(ErrorCode::invalid_parameter, "backward_render: frame rendered without contributors");

    ParamGrads grads;
    grads.resize(cloud);
    for (const Splat2D& s : frame.splats) grads.visible[s.source_index] = 1;

    std::vector<SplatAccum> acc(frame.splats.size());

    // Per-pixel pass: distribute the upstream color/depth gradients over the
    // recorded contributions of each pixel.
    std::vector<double> trans;
    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            const auto& contribs = frame.contributors_at(y, x);
            if (contribs.empty()) continue;
            const Vec3 g_color = dL_dcolor.rgb(y, x);
            const double g_depth = dL_ddepth.at(y, x);
            if (g_color.x == 0 && g_color.y == 0 && g_color.z == 0 && g_depth == 0) continue;

            const double alpha_total = frame.alpha.at(y, x);
            const double raw_depth = frame.raw_depth.at(y, x);
            const double denom = std::max(alpha_total, kAlphaNormEps);
            const double g_raw = g_depth / denom;
            const double g_alpha_total =
                alpha_total > kAlphaNormEps ? -g_depth * raw_depth / (denom * denom) : 0.0;

            const size_t k_count = contribs.size();
            // Replay transmittance in forward order.
            trans.resize(k_count + 1);
            trans[0] = 1.0;
            for (size_t k = 0; k < k_count; ++k)
                trans[k + 1] = trans[k] * (1.0 - contribs[k].alpha);

            Vec3 suffix_color = frame.background * trans[k_count];
            double suffix_depth = 0.0, suffix_alpha = 0.0;
            for (size_t k = k_count; k-- > 0;) {
                const Contribution& c = contribs[k];
                const Splat2D& s = frame.splats[c.splat];
                SplatAccum& a = acc[c.splat];
                a.touched = true;
                const double t_k = trans[k];
                const double w = c.alpha * t_k;
                const double one_minus = 1.0 - c.alpha;

                // d(loss)/d(alpha_k) through color, raw depth and total alpha.
                const double d_alpha =
                    g_color.dot(s.color * t_k - suffix_color * (1.0 / one_minus)) +
                    g_raw * (s.depth * t_k - suffix_depth / one_minus) +
                    g_alpha_total * (t_k - suffix_alpha / one_minus);

                a.color += g_color * w;
                a.depth += g_raw * w;

                // Chain alpha to opacity and the 2D Gaussian unless the
                // kAlphaMax clamp was active (zero derivative there).
                const Vec2 d{x - s.mean2d.x, y - s.mean2d.y};
                const double maha = d.dot(s.inv_cov2d * d);
                const double falloff = std::exp(-0.5 * maha);
                const double alpha_raw = s.opacity * falloff;
                if (alpha_raw <= kAlphaMax) {
                    a.opacity += d_alpha * falloff;
                    const double d_maha = -0.5 * alpha_raw * d_alpha;
                    const Vec2 md = s.inv_cov2d * d;
                    a.mean2d += md * (-2.0 * d_maha);
                    a.inv_cov(0, 0) += d_maha * d.x * d.x;
                    a.inv_cov(0, 1) += d_maha * d.x * d.y;
                    a.inv_cov(1, 0) += d_maha * d.y * d.x;
                    a.inv_cov(1, 1) += d_maha * d.y * d.y;
                }

                suffix_color += s.color * w;
                suffix_depth += s.depth * w;
                suffix_alpha += w;
            }
        }
    }

    // Per-splat pass: chain the accumulated screen-space gradients to the
    // 3D parameters.
    const double ndc_x = 0.5 * cam.width, ndc_y = 0.5 * cam.height;
    for (size_t si = 0; si < frame.splats.size(); ++si) {
        const Splat2D& s = frame.splats[si];
        const SplatAccum& a = acc[si];
        grads.pos2d_norm[s.source_index] =
            std::sqrt(a.mean2d.x * ndc_x * a.mean2d.x * ndc_x +
                      a.mean2d.y * ndc_y * a.mean2d.y * ndc_y);
        if (!a.touched) continue;

        const Gaussian& g = cloud.gaussians[s.source_index];
        const Vec3 p = cam.to_camera(g.position);
        const double z2 = p.z * p.z, z3 = z2 * p.z;
        const double j00 = cam.fx / p.z, j02 = -cam.fx * p.x / z2;
        const double j11 = cam.fy / p.z, j12 = -cam.fy * p.y / z2;

        // Inverse covariance -> covariance.
        const Mat2 m = s.inv_cov2d;
        const Mat2 d_cov2d = (m * a.inv_cov * m) * -1.0;

        // Sigma' = J Gamma J^T: gradients w.r.t. Gamma and J.
        const Quat qn = g.rotation.normalized();
        const Mat3 rot = qn.to_matrix();
        const Vec3 scale = g.scale();
        const Mat3 n_mat = rot * Mat3::diagonal(scale);
        const Mat3 cov3 = n_mat * n_mat.transpose();
        const Mat3 gamma = cam.rotation * cov3 * cam.rotation.transpose();

        // J as two rows over camera coordinates.
        const Vec3 jrow0{j00, 0, j02}, jrow1{0, j11, j12};
        // d_gamma = J^T d_cov2d J.
        Mat3 d_gamma;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                d_gamma(r, c) = jrow0[r] * (d_cov2d(0, 0) * jrow0[c] + d_cov2d(0, 1) * jrow1[c]) +
                                jrow1[r] * (d_cov2d(1, 0) * jrow0[c] + d_cov2d(1, 1) * jrow1[c]);
        // d_j = (d_cov2d + d_cov2d^T) J Gamma.
        const Mat2 sym = d_cov2d + d_cov2d.transpose();
        const Vec3 jg0 = gamma * jrow0;  // Gamma symmetric: (J Gamma) rows
        const Vec3 jg1 = gamma * jrow1;
        const Vec3 dj_row0 = jg0 * sym(0, 0) + jg1 * sym(0, 1);
        const Vec3 dj_row1 = jg0 * sym(1, 0) + jg1 * sym(1, 1);

        // Position gradient in camera coordinates.
        Vec3 dp{j00 * a.mean2d.x, j11 * a.mean2d.y, j02 * a.mean2d.x + j12 * a.mean2d.y};
        dp.z += a.depth;
        dp.x += dj_row0.z * (-cam.fx / z2);
        dp.y += dj_row1.z * (-cam.fy / z2);
        dp.z += dj_row0.x * (-cam.fx / z2) + dj_row0.z * (2.0 * cam.fx * p.x / z3) +
                dj_row1.y * (-cam.fy / z2) + dj_row1.z * (2.0 * cam.fy * p.y / z3);

        Vec3 d_position = cam.rotation.transpose() * dp;

        // 3D covariance -> (rotation, log scales).
        const Mat3 d_cov3 = cam.rotation.transpose() * d_gamma * cam.rotation;
        const Mat3 d_n = (d_cov3 + d_cov3.transpose()) * n_mat;
        Vec3 d_log_scale;
        Mat3 d_rot;
        for (int k = 0; k < 3; ++k) {
            double ds = 0;
            for (int r = 0; r < 3; ++r) {
                d_rot(r, k) = d_n(r, k) * scale[k];
                ds += d_n(r, k) * rot(r, k);
            }
            d_log_scale[k] = ds * scale[k];
        }

        Mat3 dr_dq[4];
        rotation_quat_jacobian(qn, dr_dq);
        Vec4 d_qhat;
        for (int i = 0; i < 4; ++i) {
            double v = 0;
            for (int e = 0; e < 9; ++e) v += d_rot.m[e] * dr_dq[i].m[e];
            d_qhat[i] = v;
        }
        // Through the normalization q_hat = q / |q|.
        const double qlen = g.rotation.norm();
        const Vec4 qh{qn.w, qn.x, qn.y, qn.z};
        const double proj = qh.dot(d_qhat);
        Vec4 d_quat = (d_qhat + qh * (-proj)) * (1.0 / qlen);

        // Color -> SH coefficients and view direction.
        const Vec3 to_gaussian = g.position - cam.center();
        const double dist = to_gaussian.norm();
        const Vec3 dir = to_gaussian / dist;
        const int n_coeffs = sh_coeff_count(cloud.sh_degree);
        double basis[16];
        Vec3 d_basis[16];
        sh_basis(dir, cloud.sh_degree, basis, d_basis);
        Vec3 d_dir;
        auto& sh_grad = grads.sh[s.source_index];
        for (int ch = 0; ch < 3; ++ch) {
            if (s.color_clamp_mask & (1u << ch)) continue;
            const double gc = a.color[ch];
            if (gc == 0) continue;
            for (int k = 0; k < n_coeffs; ++k) {
                sh_grad[k][ch] += basis[k] * gc;
                d_dir += d_basis[k] * (g.sh[k][ch] * gc);
            }
        }
        // d(dir)/d(position) = (I - dir dir^T) / dist.
        d_position += (d_dir - dir * dir.dot(d_dir)) / dist;

        grads.position[s.source_index] += d_position;
        grads.rotation[s.source_index] += d_quat;
        grads.log_scale[s.source_index] += d_log_scale;
        grads.opacity_logit[s.source_index] +=
            a.opacity * s.opacity * (1.0 - s.opacity);
    }

    for (size_t i = 0; i < cloud.size(); ++i) {
        bool ok = all_finite(grads.position[i]) && all_finite(grads.rotation[i]) &&
                  all_finite(grads.log_scale[i]) && std::isfinite(grads.opacity_logit[i]);
        for (const Vec3& v : grads.sh[i]) ok = ok && all_finite(v);
        if (!ok)
            fail(ErrorCode::gradient_overflow,
                 "backward_render: non-finite gradient for Gaussian " + std::to_string(i));
    }
    return grads;
}

}  // namespace splat
