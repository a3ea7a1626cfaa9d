// AVX2 variants. Compiled with -mavx2 only (no FMA contraction) so that the
// binning kernel produces bit-identical cells to the scalar reference.

#include <immintrin.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "geostory/simd/kernels.hpp"

namespace geostory::simd {
namespace {

constexpr double kRad = std::numbers::pi / 180.0;

// pi/2 split for Cody-Waite reduction; the high part has 33 significant bits
// so j * kPio2Hi is exact for the small quadrant counts seen here.
constexpr double kPio2Hi = 1.57079632673412561417e+00;
constexpr double kPio2Lo = 6.07710050650619224932e-11;
constexpr double kTwoOverPi = 6.36619772367581382433e-01;

// Minimax coefficients on [-pi/4, pi/4].
constexpr double kS1 = -1.66666666666666324348e-01;
constexpr double kS2 = 8.33333333332248946124e-03;
constexpr double kS3 = -1.98412698298579493134e-04;
constexpr double kS4 = 2.75573137070700676789e-06;
constexpr double kS5 = -2.50507602534068634195e-08;
constexpr double kS6 = 1.58969099521155010221e-10;
constexpr double kC1 = 4.16666666666666019037e-02;
constexpr double kC2 = -1.38888888888741095749e-03;
constexpr double kC3 = 2.48015872894767294178e-05;
constexpr double kC4 = -2.75573143513906633035e-07;
constexpr double kC5 = 2.08757232129817482790e-09;
constexpr double kC6 = -1.13596475577881948265e-11;

inline __m256d set1(double v) { return _mm256_set1_pd(v); }
inline __m256d add(__m256d a, __m256d b) { return _mm256_add_pd(a, b); }
inline __m256d sub(__m256d a, __m256d b) { return _mm256_sub_pd(a, b); }
inline __m256d mul(__m256d a, __m256d b) { return _mm256_mul_pd(a, b); }

// sin and cos of x, valid for |x| up to a few multiples of pi.
inline void sincos4(__m256d x, __m256d& s, __m256d& c) {
  const __m256d j = _mm256_round_pd(mul(x, set1(kTwoOverPi)),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  const __m256d r = sub(sub(x, mul(j, set1(kPio2Hi))), mul(j, set1(kPio2Lo)));
  const __m256d z = mul(r, r);

  __m256d ps = add(set1(kS5), mul(z, set1(kS6)));
  ps = add(set1(kS4), mul(z, ps));
  ps = add(set1(kS3), mul(z, ps));
  ps = add(set1(kS2), mul(z, ps));
  ps = add(set1(kS1), mul(z, ps));
  const __m256d sin_r = add(r, mul(mul(r, z), ps));

  __m256d pc = add(set1(kC5), mul(z, set1(kC6)));
  pc = add(set1(kC4), mul(z, pc));
  pc = add(set1(kC3), mul(z, pc));
  pc = add(set1(kC2), mul(z, pc));
  pc = add(set1(kC1), mul(z, pc));
  const __m256d cos_r = add(sub(set1(1.0), mul(set1(0.5), z)), mul(mul(z, z), pc));

  // Quadrant q = j mod 4 in {0, 1, 2, 3}.
  const __m256d q = sub(j, mul(set1(4.0), _mm256_floor_pd(mul(j, set1(0.25)))));
  const __m256d q1 = _mm256_cmp_pd(q, set1(1.0), _CMP_EQ_OQ);
  const __m256d q2 = _mm256_cmp_pd(q, set1(2.0), _CMP_EQ_OQ);
  const __m256d q3 = _mm256_cmp_pd(q, set1(3.0), _CMP_EQ_OQ);
  const __m256d swap = _mm256_or_pd(q1, q3);
  const __m256d sign_bit = set1(-0.0);
  const __m256d neg_s = _mm256_and_pd(_mm256_or_pd(q2, q3), sign_bit);
  const __m256d neg_c = _mm256_and_pd(_mm256_or_pd(q1, q2), sign_bit);

  s = _mm256_xor_pd(_mm256_blendv_pd(sin_r, cos_r, swap), neg_s);
  c = _mm256_xor_pd(_mm256_blendv_pd(cos_r, sin_r, swap), neg_c);
}

inline __m256d sin4(__m256d x) {
  __m256d s, c;
  sincos4(x, s, c);
  return s;
}

inline __m256d cos4(__m256d x) {
  __m256d s, c;
  sincos4(x, s, c);
  return c;
}

// Loads four consecutive GeoPoints and splits them into lon and lat lanes.
inline void load4(const GeoPoint* p, __m256d& lon, __m256d& lat) {
  const __m256d v0 = _mm256_loadu_pd(&p[0].lon);  // lon0 lat0 lon1 lat1
  const __m256d v1 = _mm256_loadu_pd(&p[2].lon);  // lon2 lat2 lon3 lat3
  lon = _mm256_permute4x64_pd(_mm256_unpacklo_pd(v0, v1), _MM_SHUFFLE(3, 1, 2, 0));
  lat = _mm256_permute4x64_pd(_mm256_unpackhi_pd(v0, v1), _MM_SHUFFLE(3, 1, 2, 0));
}

// Haversine term with the first point's cosine precomputed.
inline __m256d term4(__m256d lon_a, __m256d lat_a, __m256d cos_lat_a, __m256d lon_b,
                     __m256d lat_b) {
  const __m256d half_rad = set1(kRad * 0.5);
  const __m256d s_lat = sin4(mul(sub(lat_b, lat_a), half_rad));
  const __m256d s_lon = sin4(mul(sub(lon_b, lon_a), half_rad));
  const __m256d c = mul(cos_lat_a, cos4(mul(lat_b, set1(kRad))));
  return add(mul(s_lat, s_lat), mul(c, mul(s_lon, s_lon)));
}

void haversine_terms(GeoPoint origin, const GeoPoint* pts, std::size_t n, double* out) {
  const __m256d o_lon = set1(origin.lon);
  const __m256d o_lat = set1(origin.lat);
  const __m256d o_cos = set1(std::cos(origin.lat * kRad));
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d lon, lat;
    load4(pts + i, lon, lat);
    _mm256_storeu_pd(out + i, term4(o_lon, o_lat, o_cos, lon, lat));
  }
  for (; i < n; ++i) out[i] = ref::haversine_term(origin, pts[i]);
}

void consecutive_terms(const GeoPoint* line, std::size_t n, double* out) {
  std::size_t i = 0;
  for (; i + 5 <= n; i += 4) {
    __m256d lon_a, lat_a, lon_b, lat_b;
    load4(line + i, lon_a, lat_a);
    load4(line + i + 1, lon_b, lat_b);
    const __m256d cos_a = cos4(mul(lat_a, set1(kRad)));
    _mm256_storeu_pd(out + i, term4(lon_a, lat_a, cos_a, lon_b, lat_b));
  }
  for (; i + 1 < n; ++i) out[i] = ref::haversine_term(line[i], line[i + 1]);
}

SegmentHit min_segment_term(GeoPoint p, const GeoPoint* line, std::size_t n) {
  const __m256d p_lon = set1(p.lon);
  const __m256d p_lat = set1(p.lat);
  const __m256d p_cos = set1(std::cos(p.lat * kRad));
  const __m256d zero = _mm256_setzero_pd();
  const __m256d one = set1(1.0);

  __m256d best = set1(std::numeric_limits<double>::infinity());
  __m256d best_idx = zero;
  __m256d idx = _mm256_setr_pd(0.0, 1.0, 2.0, 3.0);

  std::size_t i = 0;
  for (; i + 5 <= n; i += 4) {
    __m256d a_lon, a_lat, b_lon, b_lat;
    load4(line + i, a_lon, a_lat);
    load4(line + i + 1, b_lon, b_lat);

    const __m256d kx = cos4(mul(mul(add(a_lat, b_lat), set1(0.5)), set1(kRad)));
    const __m256d seg_lon = sub(b_lon, a_lon);
    const __m256d seg_lat = sub(b_lat, a_lat);
    const __m256d dx = mul(seg_lon, kx);
    const __m256d px = mul(sub(p_lon, a_lon), kx);
    const __m256d py = sub(p_lat, a_lat);
    const __m256d len2 = add(mul(dx, dx), mul(seg_lat, seg_lat));
    const __m256d dot = add(mul(px, dx), mul(py, seg_lat));
    const __m256d nonzero = _mm256_cmp_pd(len2, zero, _CMP_GT_OQ);
    __m256d t = _mm256_div_pd(dot, _mm256_blendv_pd(one, len2, nonzero));
    t = _mm256_min_pd(_mm256_max_pd(t, zero), one);
    t = _mm256_and_pd(t, nonzero);

    const __m256d at_end = _mm256_cmp_pd(t, one, _CMP_EQ_OQ);
    const __m256d q_lon = _mm256_blendv_pd(add(a_lon, mul(t, seg_lon)), b_lon, at_end);
    const __m256d q_lat = _mm256_blendv_pd(add(a_lat, mul(t, seg_lat)), b_lat, at_end);
    const __m256d term = term4(p_lon, p_lat, p_cos, q_lon, q_lat);

    const __m256d better = _mm256_cmp_pd(term, best, _CMP_LT_OQ);
    best = _mm256_blendv_pd(best, term, better);
    best_idx = _mm256_blendv_pd(best_idx, idx, better);
    idx = add(idx, set1(4.0));
  }

  alignas(32) double terms[4];
  alignas(32) double indices[4];
  _mm256_store_pd(terms, best);
  _mm256_store_pd(indices, best_idx);
  SegmentHit hit{std::numeric_limits<double>::infinity(), 0};
  for (int lane = 0; lane < 4; ++lane) {
    const auto seg = static_cast<std::size_t>(indices[lane]);
    if (terms[lane] < hit.term || (terms[lane] == hit.term && seg < hit.segment)) {
      hit = {terms[lane], seg};
    }
  }
  for (; i + 1 < n; ++i) {
    const double term = ref::haversine_term(p, ref::project_on_segment(p, line[i], line[i + 1]));
    if (term < hit.term) hit = {term, i};
  }
  return hit;
}

void bin_points(const GridFrame& f, const GeoPoint* pts, std::size_t n, std::int32_t* cells) {
  const __m256d min_lon = set1(f.bbox.min_lon);
  const __m256d min_lat = set1(f.bbox.min_lat);
  const __m256d max_lon = set1(f.bbox.max_lon);
  const __m256d max_lat = set1(f.bbox.max_lat);
  const __m256d kx = set1(f.lon_cells_per_deg);
  const __m256d ky = set1(f.lat_cells_per_deg);
  const __m256d last_col = set1(static_cast<double>(f.cols - 1));
  const __m256d last_row = set1(static_cast<double>(f.rows - 1));
  const __m256d cols = set1(static_cast<double>(f.cols));
  const __m256d outside = set1(-1.0);

  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d lon, lat;
    load4(pts + i, lon, lat);
    const __m256d inside = _mm256_and_pd(
        _mm256_and_pd(_mm256_cmp_pd(lon, min_lon, _CMP_GE_OQ), _mm256_cmp_pd(lon, max_lon, _CMP_LE_OQ)),
        _mm256_and_pd(_mm256_cmp_pd(lat, min_lat, _CMP_GE_OQ), _mm256_cmp_pd(lat, max_lat, _CMP_LE_OQ)));
    const __m256d col = _mm256_min_pd(_mm256_floor_pd(mul(sub(lon, min_lon), kx)), last_col);
    const __m256d row = _mm256_min_pd(_mm256_floor_pd(mul(sub(lat, min_lat), ky)), last_row);
    const __m256d cell = _mm256_blendv_pd(outside, add(mul(row, cols), col), inside);
    _mm_storeu_si128(reinterpret_cast<__m128i*>(cells + i), _mm256_cvttpd_epi32(cell));
  }
  for (; i < n; ++i) cells[i] = ref::bin_point(f, pts[i]);
}

constexpr Kernels kAvx2{Isa::Avx2, haversine_terms, consecutive_terms, min_segment_term,
                        bin_points};

}  // namespace

const Kernels* avx2_kernels() noexcept { return &kAvx2; }

}  // namespace geostory::simd
