#include "dcmmi/mod_indices.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "dcmmi/errors.hpp"

namespace dcmmi {

namespace {

std::vector<std::uint32_t> singletons_of(std::uint32_t set) {
  std::vector<std::uint32_t> out;
  while (set) {
    const std::uint32_t bit = set & (~set + 1u);
    out.push_back(bit);
    set ^= bit;
  }
  return out;
}

}  // namespace

std::vector<Candidate> enumerate_qmatrix_candidates(const ModelSpec& spec, int max_order) {
  if (max_order < 1) throw ConfigError("enumerate_qmatrix_candidates: max_order must be >= 1");
  std::vector<Candidate> out;
  for (int i = 0; i < spec.items(); ++i) {
    const std::uint32_t measured = spec.q.row_mask(i);
    for (int a = 0; a < spec.attributes(); ++a) {
      const std::uint32_t abit = 1u << a;
      if (measured & abit) continue;
      out.push_back({CandidateKind::qmatrix, i, abit, ScoreConstraint::positive, {}});
      // Interactions of the new attribute with measured subsets, smallest
      // level first (catalog order).
      for (int r = 0; r < spec.catalog.count(); ++r) {
        const std::uint32_t s = spec.catalog.mask_of(r);
        if ((s & ~measured) || std::popcount(s) + 1 > max_order) continue;
        const std::uint32_t set = s | abit;
        out.push_back({CandidateKind::qmatrix, i, set, ScoreConstraint::greater_than_minus_k,
                       singletons_of(set)});
      }
    }
  }
  return out;
}

std::vector<Candidate> enumerate_model_candidates(const ModelSpec& spec, int max_order) {
  if (max_order < 1) throw ConfigError("enumerate_model_candidates: max_order must be >= 1");
  std::vector<Candidate> out;
  if (spec.kind == ModelKind::lcdm_full) return out;  // nothing is masked out
  for (int i = 0; i < spec.items(); ++i) {
    const std::uint32_t measured = spec.q.row_mask(i);
    for (int r = 0; r < spec.catalog.count(); ++r) {
      const std::uint32_t s = spec.catalog.mask_of(r);
      if ((s & ~measured) || std::popcount(s) > max_order || spec.is_active(i, r)) continue;
      if (std::popcount(s) == 1)
        out.push_back({CandidateKind::model, i, s, ScoreConstraint::positive, {}});
      else
        out.push_back({CandidateKind::model, i, s, ScoreConstraint::greater_than_minus_k,
                       singletons_of(s)});
    }
  }
  return out;
}

std::vector<ModificationIndex> compute_mis(const ModelSpec& spec, const FitResult& fit,
                                           const ResponseMatrix& data,
                                           const std::vector<Candidate>& candidates,
                                           std::vector<std::string>* warnings) {
  if (!fit.converged && warnings)
    warnings->push_back("fit did not converge; modification indices may be unreliable");

  ModelTables tables = ModelTables::build(spec);
  LikelihoodParts parts = e_step(spec, fit.params, data);
  const Matrix y = data.entries.cast<double>();
  const Matrix g_reduced = detail::reduced_gradient_matrix(spec, tables, parts, y);

  PartitionedInfo info(empirical_info(g_reduced));
  if (info.ridged() && warnings)
    warnings->push_back("reduced-model information ill-conditioned; ridge applied");

  std::vector<ModificationIndex> out;
  out.reserve(candidates.size());
  for (const Candidate& cand : candidates) {
    ModificationIndex mi;
    mi.candidate = cand;
    try {
      const Vector g =
          detail::item_gradient_column(tables, parts, y, cand.item, cand.attribute_set);
      if (!g.allFinite()) throw NumericError("non-finite gradient for candidate");

      const double s2 = g.sum();
      const Matrix i12 = g_reduced.transpose() * g;
      Matrix i22(1, 1);
      i22(0, 0) = g.squaredNorm();
      const InfoBlockResult blk = info.tail_inverse(i12, i22);
      if (!blk.available) {
        mi.unavailable = true;
        mi.unavailable_reason = "candidate information singular after partitioning";
        out.push_back(std::move(mi));
        continue;
      }

      double k = 0.0;
      if (cand.constraint == ScoreConstraint::greater_than_minus_k) {
        double smallest = std::numeric_limits<double>::infinity();
        for (std::uint32_t s : cand.k_source) {
          const int rank = spec.catalog.rank_of(s);
          // A main effect absent from the reduced model contributes 0,
          // collapsing the constraint to plain positivity.
          const double value = (rank >= 0 && spec.is_active(cand.item, rank))
                                   ? fit.params.items[cand.item].effects[rank]
                                   : 0.0;
          smallest = std::min(smallest, value);
        }
        if (std::isfinite(smallest)) k = std::max(0.0, smallest);
      }
      mi.k = k;

      const OneSidedScoreResult osr =
          one_sided_score(s2, blk.inverse_block(0, 0), cand.constraint, k);
      mi.t_s = osr.t_s;
      mi.p_value = osr.p_value;
      mi.s2 = osr.s2;
      mi.boundary_case = osr.boundary_case;
    } catch (const NumericError& err) {
      mi.unavailable = true;
      mi.unavailable_reason = err.what();
    }
    out.push_back(std::move(mi));
  }
  return out;
}

std::string candidate_label(const Candidate& candidate, const ModelSpec& spec) {
  std::string attrs;
  for (int a = 0; a < spec.attributes(); ++a)
    if (candidate.attribute_set & (1u << a)) {
      if (!attrs.empty()) attrs += ',';
      attrs += std::to_string(a + 1);
    }
  return "lambda_{" + spec.q.item_ids[candidate.item] + "," +
         std::to_string(std::popcount(candidate.attribute_set)) + ",(" + attrs + ")}";
}

MIReport apply_multiplicity(std::vector<ModificationIndex> indices, double alpha,
                            std::optional<int> m_override, const ModelSpec& spec) {
  if (!(alpha > 0.0 && alpha < 0.5))
    throw ConfigError("apply_multiplicity: alpha must lie in (0, 0.5)");
  if (m_override && *m_override < 1)
    throw ConfigError("apply_multiplicity: m override must be >= 1");

  MIReport rep;
  rep.alpha = alpha;
  int available = 0;
  for (const auto& mi : indices)
    if (!mi.unavailable) ++available;
  rep.m = m_override ? *m_override : available;
  rep.indices = std::move(indices);
  if (rep.m == 0) {
    rep.adjusted_alpha = 0.0;
    rep.critical_value = std::numeric_limits<double>::infinity();
    return rep;
  }

  rep.adjusted_alpha = alpha / rep.m;
  rep.critical_value = mixture_critical_value(rep.adjusted_alpha);
  for (auto& mi : rep.indices) {
    if (mi.unavailable) continue;
    mi.significant_raw = mi.p_value < alpha;
    mi.significant_adjusted = mi.p_value < rep.adjusted_alpha;
  }

  // Significant indices, largest statistic first; at most one change should
  // be applied per refit, so order is the recommendation.
  std::vector<const ModificationIndex*> hits;
  for (const auto& mi : rep.indices)
    if (mi.significant_adjusted) hits.push_back(&mi);
  std::stable_sort(hits.begin(), hits.end(),
                   [](const ModificationIndex* a, const ModificationIndex* b) {
                     return a->t_s > b->t_s;
                   });

  const auto main_significant = [&](const ModificationIndex& mi, std::uint32_t bit) {
    for (const auto& other : rep.indices)
      if (other.candidate.item == mi.candidate.item && other.candidate.attribute_set == bit &&
          other.candidate.kind == mi.candidate.kind)
        return other.significant_adjusted;
    return false;  // sibling main effect not among the candidates
  };

  for (const ModificationIndex* mi : hits) {
    SuggestedChange change;
    change.candidate = mi->candidate;
    const std::string label = candidate_label(mi->candidate, spec);
    const std::uint32_t measured = spec.q.row_mask(mi->candidate.item);
    const std::uint32_t new_bits = mi->candidate.attribute_set & ~measured;
    const int level = std::popcount(mi->candidate.attribute_set);

    std::string flip;
    for (int a = 0; a < spec.attributes(); ++a)
      if (new_bits & (1u << a)) {
        if (!flip.empty()) flip += ", ";
        flip += "q[" + spec.q.item_ids[mi->candidate.item] + "," + spec.q.attribute_ids[a] +
                "] -> 1";
      }

    if (level == 1) {
      change.action = mi->candidate.kind == CandidateKind::qmatrix
                          ? "set " + flip + " and free " + label
                          : "free " + label;
    } else {
      change.action = mi->candidate.kind == CandidateKind::qmatrix
                          ? "set " + flip + " and free the interaction " + label
                          : "free the interaction " + label;
      // Hierarchy check: for a new attribute, the sibling main-effect
      // candidate; for model candidates, the mains under the set.
      bool mains_ok = true;
      if (mi->candidate.kind == CandidateKind::qmatrix) {
        mains_ok = main_significant(*mi, new_bits);
      } else {
        for (std::uint32_t s : singletons_of(mi->candidate.attribute_set)) {
          const int rank = spec.catalog.rank_of(s);
          if (rank >= 0 && spec.is_active(mi->candidate.item, rank)) continue;  // already free
          mains_ok = mains_ok && main_significant(*mi, s);
        }
      }
      change.note = mains_ok ? "supporting main effect(s) also significant"
                             : "hierarchy principle: supporting main effect(s) not "
                               "significant; decide whether to add the interaction alone";
    }
    rep.suggested_changes.push_back(std::move(change));
  }
  return rep;
}

std::string render_mi_table(const MIReport& report, const ModelSpec& spec) {
  std::ostringstream os;
  os << "Modification indices\n";
  os << "--------------------\n";
  os << std::fixed;
  os << "alpha = " << std::setprecision(4) << report.alpha << "   tests (m) = " << report.m;
  if (report.m > 0) {
    os << "   adjusted alpha = " << std::scientific << std::setprecision(3)
       << report.adjusted_alpha << std::fixed << "   critical value T_S > "
       << std::setprecision(2) << report.critical_value;
  }
  os << "\n\n";

  std::size_t label_width = 12;
  std::vector<std::string> labels;
  labels.reserve(report.indices.size());
  for (const auto& mi : report.indices) {
    labels.push_back(candidate_label(mi.candidate, spec));
    label_width = std::max(label_width, labels.back().size());
  }

  bool any_unavailable = false;
  const int pairs_per_row = 2;
  for (std::size_t i = 0; i < report.indices.size(); ++i) {
    const auto& mi = report.indices[i];
    os << std::left << std::setw(static_cast<int>(label_width)) << labels[i] << std::right;
    if (mi.unavailable) {
      os << "      n/a   ";
      any_unavailable = true;
    } else {
      os << std::setw(9) << std::setprecision(2) << mi.t_s;
      if (mi.significant_adjusted)
        os << " **";
      else if (mi.significant_raw)
        os << " * ";
      else
        os << "   ";
    }
    if (i + 1 == report.indices.size() || (i + 1) % pairs_per_row == 0)
      os << "\n";
    else
      os << "    ";
  }

  os << "\n*  p < alpha    ** p < alpha/m (Bonferroni-adjusted)\n";
  if (any_unavailable) {
    os << "\nUnavailable indices:\n";
    for (std::size_t i = 0; i < report.indices.size(); ++i)
      if (report.indices[i].unavailable)
        os << "  " << labels[i] << ": " << report.indices[i].unavailable_reason << "\n";
  }

  os << "\nSuggested respecification (apply at most one change, then refit):\n";
  if (report.suggested_changes.empty()) {
    os << "  none: no candidate exceeds the adjusted threshold\n";
  } else {
    int n = 0;
    for (const auto& change : report.suggested_changes) {
      os << "  " << ++n << ". " << change.action;
      if (!change.note.empty()) os << "  [" << change.note << "]";
      os << "\n";
    }
  }
  return os.str();
}

}  // namespace dcmmi
