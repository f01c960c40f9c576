#include "coco_reference.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

namespace reference {

using detkit::metrics::Detection;
using detkit::metrics::GroundTruth;

namespace {

struct Gt {
  double bbox[4];
  double area;
  int ignore;
};

struct Dt {
  double bbox[4];
  double area;
  double score;
};

struct EvalImg {
  std::vector<std::vector<int>> dt_matches;  // [T][D] 1 if matched
  std::vector<std::vector<int>> dt_ignore;   // [T][D]
  std::vector<int> gt_ignore;
  std::vector<double> dt_scores;
};

// maskApi.c bbIou without crowd handling.
double bb_iou(const double* dt, const double* gt) {
  const double da = dt[2] * dt[3];
  const double ga = gt[2] * gt[3];
  const double w = std::fmin(dt[0] + dt[2], gt[0] + gt[2]) - std::fmax(dt[0], gt[0]);
  if (w <= 0) return 0.0;
  const double h = std::fmin(dt[1] + dt[3], gt[1] + gt[3]) - std::fmax(dt[1], gt[1]);
  if (h <= 0) return 0.0;
  const double i = w * h;
  const double u = da + ga - i;
  return u > 0 ? i / u : 0.0;
}

bool area_ok(double a, int area_idx) {
  switch (area_idx) {
    case 0: return true;
    case 1: return a < 1024.0;
    case 2: return a >= 1024.0 && a < 9216.0;
    default: return a >= 9216.0;
  }
}

std::vector<double> np_linspace(double start, double stop, int num) {
  std::vector<double> y(num);
  const double step = (stop - start) / (num - 1);
  for (int i = 0; i < num; ++i) y[i] = i * step + start;
  y[num - 1] = stop;
  return y;
}

std::optional<EvalImg> evaluate_img(std::vector<Gt> gt, std::vector<Dt> dt, int area_idx,
                                    const std::vector<double>& iou_thrs, int max_det) {
  if (gt.empty() && dt.empty()) return std::nullopt;
  for (auto& g : gt) g.ignore = area_ok(g.area, area_idx) ? 0 : 1;

  // gtind = np.argsort([g['_ignore'] for g in gt], kind='mergesort')
  std::vector<int> gtind(gt.size());
  std::iota(gtind.begin(), gtind.end(), 0);
  std::stable_sort(gtind.begin(), gtind.end(), [&](int a, int b) { return gt[a].ignore < gt[b].ignore; });
  std::vector<Gt> gts;
  for (int i : gtind) gts.push_back(gt[i]);

  std::vector<int> dtind(dt.size());
  std::iota(dtind.begin(), dtind.end(), 0);
  std::stable_sort(dtind.begin(), dtind.end(), [&](int a, int b) { return -dt[a].score < -dt[b].score; });
  std::vector<Dt> dts;
  for (int i : dtind) {
    if (static_cast<int>(dts.size()) >= max_det) break;
    dts.push_back(dt[i]);
  }

  const std::size_t T = iou_thrs.size(), G = gts.size(), D = dts.size();
  // ious computed in the sorted orders, as computeIoU + the gtind reindex do.
  std::vector<std::vector<double>> ious(D, std::vector<double>(G, 0.0));
  for (std::size_t d = 0; d < D; ++d)
    for (std::size_t g = 0; g < G; ++g) ious[d][g] = bb_iou(dts[d].bbox, gts[g].bbox);

  std::vector<std::vector<int>> gtm(T, std::vector<int>(G, 0));
  std::vector<std::vector<int>> dtm(T, std::vector<int>(D, 0));
  std::vector<std::vector<int>> dt_ig(T, std::vector<int>(D, 0));
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t d = 0; d < D; ++d) {
      double iou = std::min(iou_thrs[t], 1 - 1e-10);
      int m = -1;
      for (std::size_t g = 0; g < G; ++g) {
        if (gtm[t][g] > 0) continue;
        if (m > -1 && gts[m].ignore == 0 && gts[g].ignore == 1) break;
        if (ious[d][g] < iou) continue;
        iou = ious[d][g];
        m = static_cast<int>(g);
      }
      if (m == -1) continue;
      dt_ig[t][d] = gts[m].ignore;
      dtm[t][d] = 1;
      gtm[t][m] = 1;
    }
  }
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t d = 0; d < D; ++d)
      if (dtm[t][d] == 0 && !area_ok(dts[d].area, area_idx)) dt_ig[t][d] = 1;

  EvalImg e;
  e.dt_matches = dtm;
  e.dt_ignore = dt_ig;
  for (const auto& g : gts) e.gt_ignore.push_back(g.ignore);
  for (const auto& d : dts) e.dt_scores.push_back(d.score);
  return e;
}

}  // namespace

CocoStats coco_evaluate(std::span<const Detection> dets, std::span<const GroundTruth> gts,
                        std::span<const detkit::metrics::ImageId> image_ids, int max_dets) {
  const std::vector<double> iou_thrs = np_linspace(0.5, 0.95, 10);
  const std::vector<double> rec_thrs = np_linspace(0.0, 1.0, 101);
  std::set<long long> img_set(image_ids.begin(), image_ids.end());
  std::vector<long long> img_ids(img_set.begin(), img_set.end());
  std::set<long long> cat_set;
  for (const auto& g : gts) cat_set.insert(g.category);
  for (const auto& d : dets) cat_set.insert(d.category);
  std::vector<long long> cat_ids(cat_set.begin(), cat_set.end());

  std::map<std::pair<long long, long long>, std::vector<Gt>> gt_map;
  std::map<std::pair<long long, long long>, std::vector<Dt>> dt_map;
  for (const auto& g : gts) {
    Gt x{{g.box.x, g.box.y, g.box.w, g.box.h}, g.box.w * g.box.h, 0};
    gt_map[{g.image_id, g.category}].push_back(x);
  }
  for (const auto& d : dets) {
    Dt x{{d.box.x, d.box.y, d.box.w, d.box.h}, d.box.w * d.box.h, d.score};
    dt_map[{d.image_id, d.category}].push_back(x);
  }

  const int T = 10, R = 101, K = static_cast<int>(cat_ids.size()), A = 4;
  // precision[t][r][k][a], -1 where undefined
  std::vector<double> precision(static_cast<std::size_t>(T * R * std::max(K, 1) * A), -1.0);
  auto P = [&](int t, int r, int k, int a) -> double& { return precision[((t * R + r) * K + k) * A + a]; };

  for (int k = 0; k < K; ++k) {
    for (int a = 0; a < A; ++a) {
      std::vector<EvalImg> E;
      for (long long img : img_ids) {
        auto gi = gt_map.find({img, cat_ids[k]});
        auto di = dt_map.find({img, cat_ids[k]});
        auto e = evaluate_img(gi == gt_map.end() ? std::vector<Gt>{} : gi->second,
                              di == dt_map.end() ? std::vector<Dt>{} : di->second, a, iou_thrs, max_dets);
        if (e) E.push_back(std::move(*e));
      }
      if (E.empty()) continue;
      std::vector<double> scores;
      std::vector<std::vector<int>> dtm_all(T), dtig_all(T);
      for (const auto& e : E) {
        scores.insert(scores.end(), e.dt_scores.begin(), e.dt_scores.end());
        for (int t = 0; t < T; ++t) {
          dtm_all[t].insert(dtm_all[t].end(), e.dt_matches[t].begin(), e.dt_matches[t].end());
          dtig_all[t].insert(dtig_all[t].end(), e.dt_ignore[t].begin(), e.dt_ignore[t].end());
        }
      }
      std::vector<int> inds(scores.size());
      std::iota(inds.begin(), inds.end(), 0);
      std::stable_sort(inds.begin(), inds.end(), [&](int x, int y) { return -scores[x] < -scores[y]; });
      int npig = 0;
      for (const auto& e : E)
        for (int ig : e.gt_ignore) npig += ig == 0;
      if (npig == 0) continue;
      for (int t = 0; t < T; ++t) {
        const std::size_t nd = inds.size();
        std::vector<double> tp_sum(nd), fp_sum(nd);
        double tp = 0, fp = 0;
        for (std::size_t i = 0; i < nd; ++i) {
          const int m = dtm_all[t][inds[i]];
          const int ig = dtig_all[t][inds[i]];
          tp += (m && !ig) ? 1 : 0;
          fp += (!m && !ig) ? 1 : 0;
          tp_sum[i] = tp;
          fp_sum[i] = fp;
        }
        std::vector<double> rc(nd), pr(nd);
        for (std::size_t i = 0; i < nd; ++i) {
          rc[i] = tp_sum[i] / npig;
          pr[i] = tp_sum[i] / (fp_sum[i] + tp_sum[i] + DBL_EPSILON);
        }
        std::vector<double> q(R, 0.0);
        for (std::size_t i = nd; i-- > 1;)
          if (pr[i] > pr[i - 1]) pr[i - 1] = pr[i];
        for (int r = 0; r < R; ++r) {
          // np.searchsorted(rc, recThrs, side='left')
          std::size_t lo = 0, hi = nd;
          while (lo < hi) {
            const std::size_t mid = (lo + hi) / 2;
            if (rc[mid] < rec_thrs[r]) lo = mid + 1; else hi = mid;
          }
          if (lo < nd) q[r] = pr[lo];
        }
        for (int r = 0; r < R; ++r) P(t, r, k, a) = q[r];
      }
    }
  }

  auto summarize = [&](int a, int only_t) -> std::optional<double> {
    double s = 0;
    long n = 0;
    for (int t = 0; t < T; ++t) {
      if (only_t >= 0 && t != only_t) continue;
      for (int r = 0; r < R; ++r)
        for (int k = 0; k < K; ++k) {
          const double v = P(t, r, k, a);
          if (v > -1) { s += v; ++n; }
        }
    }
    if (n == 0) return std::nullopt;
    return s / n;
  };

  CocoStats out;
  out.values = {summarize(0, -1), summarize(0, 0), summarize(0, 5),
                summarize(1, -1), summarize(2, -1), summarize(3, -1)};
  for (int t = 0; t < T; ++t) out.per_threshold[t] = summarize(0, t);
  return out;
}

}  // namespace reference
