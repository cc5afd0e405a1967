#include "concord/analytics/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "concord/core/error.hpp"

namespace concord::analytics {

using nlohmann::json;

namespace {

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

std::vector<std::vector<double>> embed_all(const std::vector<std::string>& texts, const Embedder& embedder) {
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) {
    auto v = embedder.embed(t);
    if (!out.empty() && v.size() != out.front().size()) {
      throw Error(ErrorCode::analytics, "embedder returned vectors of different lengths");
    }
    for (double x : v) {
      if (!std::isfinite(x)) throw Error(ErrorCode::analytics, "embedder returned a non-finite value");
    }
    out.push_back(std::move(v));
  }
  return out;
}

// Minimiser of 0.5 w'Qw - c'w over the probability simplex, by a primal
// active-set method. Q must be positive definite.
Eigen::VectorXd simplex_qp(const Eigen::MatrixXd& Q, const Eigen::VectorXd& c) {
  const Eigen::Index n = c.size();
  const double scale = std::max(Q.cwiseAbs().maxCoeff(), c.cwiseAbs().maxCoeff());
  const double tol = 1e-12 * std::max(scale, 1e-300);

  Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
  Eigen::Index start = 0;
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < n; ++j) {
    const double f = 0.5 * Q(j, j) - c(j);
    if (f < best) {
      best = f;
      start = j;
    }
  }
  w(start) = 1.0;
  std::vector<bool> free(static_cast<size_t>(n), false);
  free[static_cast<size_t>(start)] = true;

  for (int iter = 0; iter < 20 * static_cast<int>(n) + 100; ++iter) {
    std::vector<Eigen::Index> F;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (free[static_cast<size_t>(i)]) F.push_back(i);
    }
    const Eigen::Index m = static_cast<Eigen::Index>(F.size());
    Eigen::MatrixXd QF(m, m);
    Eigen::VectorXd cF(m);
    for (Eigen::Index a = 0; a < m; ++a) {
      cF(a) = c(F[static_cast<size_t>(a)]);
      for (Eigen::Index b = 0; b < m; ++b) QF(a, b) = Q(F[static_cast<size_t>(a)], F[static_cast<size_t>(b)]);
    }
    Eigen::LLT<Eigen::MatrixXd> llt(QF);
    const Eigen::VectorXd qc = llt.solve(cF);
    const Eigen::VectorXd q1 = llt.solve(Eigen::VectorXd::Ones(m));
    const double mu = (1.0 - qc.sum()) / q1.sum();
    const Eigen::VectorXd target = qc + mu * q1;

    if (target.minCoeff() >= 0.0) {
      w.setZero();
      for (Eigen::Index a = 0; a < m; ++a) w(F[static_cast<size_t>(a)]) = target(a);
      const Eigen::VectorXd grad = Q * w - c;
      Eigen::Index enter = -1;
      double most_negative = -tol;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (free[static_cast<size_t>(i)]) continue;
        const double nu = grad(i) - mu;
        if (nu < most_negative) {
          most_negative = nu;
          enter = i;
        }
      }
      if (enter < 0) return w;
      free[static_cast<size_t>(enter)] = true;
      continue;
    }
    // Step toward the target until the first free weight reaches zero.
    double alpha = 1.0;
    for (Eigen::Index a = 0; a < m; ++a) {
      const double wi = w(F[static_cast<size_t>(a)]);
      if (target(a) < wi) alpha = std::min(alpha, wi / (wi - target(a)));
    }
    for (Eigen::Index a = 0; a < m; ++a) {
      const Eigen::Index i = F[static_cast<size_t>(a)];
      w(i) += alpha * (target(a) - w(i));
      if (w(i) <= 1e-15) {
        w(i) = 0.0;
        free[static_cast<size_t>(i)] = false;
      }
    }
  }
  throw Error(ErrorCode::analytics, "influence solver did not converge");
}

std::vector<Faction> labels_for(const std::vector<Statement>& opinions,
                                const std::map<ParticipantId, Faction>& given, const Embedder& embedder) {
  std::vector<Faction> labels;
  bool complete = true;
  for (const auto& o : opinions) {
    if (!o.author || !given.contains(*o.author)) complete = false;
  }
  if (complete) {
    for (const auto& o : opinions) labels.push_back(given.at(*o.author));
    return labels;
  }
  labels = cluster_factions(opinions, embedder);
  for (size_t i = 0; i < opinions.size(); ++i) {
    if (opinions[i].author) {
      if (auto it = given.find(*opinions[i].author); it != given.end()) labels[i] = it->second;
    }
  }
  return labels;
}

std::vector<LabeledOpinion> labeled(const std::vector<Statement>& opinions, const std::vector<Faction>& labels) {
  std::vector<LabeledOpinion> out;
  for (size_t i = 0; i < opinions.size(); ++i) out.push_back({opinions[i], labels[i]});
  return out;
}

}  // namespace

std::string_view to_string(Faction f) { return f == Faction::majority ? "majority" : "minority"; }

Faction faction_from_string(std::string_view name) {
  if (name == "majority") return Faction::majority;
  if (name == "minority") return Faction::minority;
  throw ValidationError("faction must be majority or minority, got '" + std::string(name) + "'");
}

std::vector<double> simplex_least_squares(const std::vector<std::vector<double>>& basis,
                                          const std::vector<double>& target) {
  if (basis.empty()) throw ValidationError("no basis vectors");
  const Eigen::Index n = static_cast<Eigen::Index>(basis.size());
  const Eigen::Index d = static_cast<Eigen::Index>(target.size());
  Eigen::MatrixXd A(d, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    if (basis[static_cast<size_t>(j)].size() != target.size()) throw ValidationError("dimension mismatch");
    for (Eigen::Index r = 0; r < d; ++r) A(r, j) = basis[static_cast<size_t>(j)][static_cast<size_t>(r)];
  }
  const Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(target.data(), d);
  Eigen::MatrixXd Q = A.transpose() * A;
  const double lambda = 1e-6 * Q.trace() / static_cast<double>(n);
  if (!(lambda > 0.0)) throw Error(ErrorCode::undefined_influence, "all opinion embeddings are zero");
  Q.diagonal().array() += lambda;
  const Eigen::VectorXd c = A.transpose() * b;
  Eigen::VectorXd w = simplex_qp(Q, c);
  const double total = w.sum();
  std::vector<double> out(static_cast<size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) out[static_cast<size_t>(j)] = w(j) / total;
  return out;
}

InfluenceReport influence_weights(const std::vector<LabeledOpinion>& opinions, const Statement& winner,
                                  const Embedder& embedder) {
  if (opinions.size() < 2) throw ValidationError("influence needs at least two opinions");
  std::vector<std::string> texts;
  for (const auto& o : opinions) texts.push_back(o.statement.text);
  texts.push_back(winner.text);
  auto vectors = embed_all(texts, embedder);
  const std::vector<double> target = vectors.back();
  vectors.pop_back();
  bool identical = true;
  for (size_t i = 1; i < vectors.size(); ++i) {
    if (vectors[i] != vectors[0]) identical = false;
  }
  if (identical) throw Error(ErrorCode::undefined_influence, "all opinion embeddings are identical");

  InfluenceReport report;
  report.embedder_id = embedder.model_id();
  report.weights = simplex_least_squares(vectors, target);
  std::vector<double> recon(target.size(), 0.0);
  for (size_t i = 0; i < opinions.size(); ++i) {
    report.opinions.push_back(opinions[i].statement.id);
    report.factions.push_back(opinions[i].faction);
    (opinions[i].faction == Faction::majority ? report.majority_weight : report.minority_weight) += report.weights[i];
    for (size_t r = 0; r < recon.size(); ++r) recon[r] += report.weights[i] * vectors[i][r];
  }
  report.residual = std::sqrt(squared_distance(recon, target));
  return report;
}

std::vector<Faction> cluster_factions(const std::vector<Statement>& opinions, const Embedder& embedder) {
  std::vector<std::string> texts;
  for (const auto& o : opinions) texts.push_back(o.text);
  const auto x = embed_all(texts, embedder);
  const size_t n = x.size();
  std::vector<Faction> labels(n, Faction::majority);
  if (n < 2) return labels;
  const size_t d = x[0].size();
  std::vector<double> mean(d, 0.0);
  for (const auto& v : x) {
    for (size_t r = 0; r < d; ++r) mean[r] += v[r] / static_cast<double>(n);
  }
  auto farthest = [&](const std::vector<double>& from) {
    size_t best = 0;
    for (size_t i = 1; i < n; ++i) {
      if (squared_distance(x[i], from) > squared_distance(x[best], from)) best = i;
    }
    return best;
  };
  std::vector<double> ca = x[farthest(mean)];
  std::vector<double> cb = x[farthest(ca)];
  if (ca == cb) return labels;
  std::vector<int> assign(n, -1);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (size_t i = 0; i < n; ++i) {
      const int a = squared_distance(x[i], cb) < squared_distance(x[i], ca) ? 1 : 0;
      if (a != assign[i]) {
        assign[i] = a;
        changed = true;
      }
    }
    if (!changed) break;
    for (int k = 0; k < 2; ++k) {
      std::vector<double> sum(d, 0.0);
      size_t count = 0;
      for (size_t i = 0; i < n; ++i) {
        if (assign[i] != k) continue;
        ++count;
        for (size_t r = 0; r < d; ++r) sum[r] += x[i][r];
      }
      if (count == 0) continue;
      for (double& s : sum) s /= static_cast<double>(count);
      (k == 0 ? ca : cb) = sum;
    }
  }
  const auto in_b = static_cast<size_t>(std::count(assign.begin(), assign.end(), 1));
  const size_t in_a = n - in_b;
  int majority = in_a > in_b ? 0 : in_b > in_a ? 1 : assign[0];
  for (size_t i = 0; i < n; ++i) labels[i] = assign[i] == majority ? Faction::majority : Faction::minority;
  return labels;
}

std::unique_ptr<Embedder> choose_embedder(const std::vector<std::string>& texts) {
  std::optional<size_t> dims;
  for (const auto& t : texts) {
    auto p = mediator::parse_position(t);
    if (!p || (dims && *dims != p->size())) return std::make_unique<mediator::HashingEmbedder>();
    dims = p->size();
  }
  if (!dims) return std::make_unique<mediator::HashingEmbedder>();
  return std::make_unique<mediator::LatentEmbedder>(*dims);
}

double dispersion(const std::vector<double>& ratings) {
  const size_t n = ratings.size();
  if (n < 2) return 0.0;
  double sum = 0.0;
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) sum += std::abs(ratings[i] - ratings[j]);
  }
  return sum / (static_cast<double>(n) * static_cast<double>(n - 1) / 2.0);
}

DivisionReport division_index(const Ratings& pre, const Ratings& post, const RatingScale& scale) {
  if (!(scale.min < scale.max)) throw ValidationError("rating scale must have min < max");
  if (pre.size() != post.size()) throw ValidationError("pre and post ratings cover different participants");
  std::vector<double> a, b;
  for (const auto& [p, r] : pre) {
    auto it = post.find(p);
    if (it == post.end()) throw ValidationError("participant '" + p.str() + "' has no post rating");
    for (double v : {r, it->second}) {
      if (!std::isfinite(v) || v < scale.min || v > scale.max) {
        throw ValidationError("rating for '" + p.str() + "' is outside the declared scale");
      }
    }
    a.push_back(r);
    b.push_back(it->second);
  }
  DivisionReport report;
  report.participants = a.size();
  report.pre = dispersion(a);
  report.post = dispersion(b);
  report.delta = report.post - report.pre;
  return report;
}

AuditReport minority_weighting_audit(const std::vector<Transcript>& transcripts, const Embedder* embedder) {
  AuditReport report;
  for (const auto& t : transcripts) {
    const auto& state = t.state;
    const Statement* initial = state.initial_winner();
    const Statement* revised = state.latest_winner();
    if (initial == nullptr || revised == nullptr || state.elections.size() < 2 || !state.elections.back().winner) {
      report.skipped.emplace_back(t.label, "no revised winner");
      continue;
    }
    std::unique_ptr<Embedder> chosen;
    if (embedder == nullptr) {
      std::vector<std::string> texts{initial->text, revised->text};
      for (const auto& o : state.opinions) texts.push_back(o.text);
      chosen = choose_embedder(texts);
    }
    const Embedder& e = embedder != nullptr ? *embedder : *chosen;
    try {
      auto opinions = labeled(state.opinions, labels_for(state.opinions, t.factions, e));
      const double before = influence_weights(opinions, *initial, e).minority_weight;
      const double after = influence_weights(opinions, *revised, e).minority_weight;
      report.sessions.push_back(SessionShift{t.label, before, after, after - before});
    } catch (const Error& err) {
      if (err.code() != ErrorCode::undefined_influence && err.code() != ErrorCode::validation) throw;
      report.skipped.emplace_back(t.label, err.what());
    }
  }
  double sum = 0.0;
  for (const auto& s : report.sessions) sum += s.shift;
  report.mean_shift = report.sessions.empty() ? 0.0 : sum / static_cast<double>(report.sessions.size());
  return report;
}

json session_analytics(const protocol::SessionState& state, const std::map<ParticipantId, Faction>& factions,
                       const Embedder* embedder) {
  std::unique_ptr<Embedder> chosen;
  if (embedder == nullptr) {
    std::vector<std::string> texts;
    for (const auto& o : state.opinions) texts.push_back(o.text);
    for (const auto& e : state.elections) {
      for (const auto& c : e.candidates) texts.push_back(c.text);
    }
    chosen = choose_embedder(texts);
  }
  const Embedder& emb = embedder != nullptr ? *embedder : *chosen;
  json doc{{"embedder", emb.model_id()}, {"method", kInfluenceMethod}};
  std::vector<Faction> labels;
  json faction_doc = json::object();
  if (!state.opinions.empty()) {
    labels = labels_for(state.opinions, factions, emb);
    for (size_t i = 0; i < labels.size(); ++i) {
      faction_doc[state.opinions[i].author->str()] = to_string(labels[i]);
    }
  }
  doc["factions"] = faction_doc;
  json elections = json::array();
  for (const auto& e : state.elections) {
    json entry{{"round", e.round}};
    if (!state.opinions.empty()) {
      entry["diversity"] = mediator::to_json(mediator::candidate_diversity(e.candidates, state.opinions, emb));
    }
    entry["influence"] = nullptr;
    if (e.winner) {
      try {
        entry["influence"] = to_json(influence_weights(labeled(state.opinions, labels), *e.winner, emb));
      } catch (const Error& err) {
        if (err.code() != ErrorCode::undefined_influence && err.code() != ErrorCode::validation) throw;
        entry["note"] = err.what();
      }
    }
    elections.push_back(entry);
  }
  doc["elections"] = elections;
  return doc;
}

json to_json(const InfluenceReport& r) {
  json weights = json::array();
  for (size_t i = 0; i < r.weights.size(); ++i) {
    weights.push_back({{"opinion", r.opinions[i].str()}, {"faction", to_string(r.factions[i])}, {"weight", r.weights[i]}});
  }
  return json{{"method", r.method},
              {"embedder", r.embedder_id},
              {"weights", weights},
              {"majority_weight", r.majority_weight},
              {"minority_weight", r.minority_weight},
              {"residual", r.residual}};
}

json to_json(const DivisionReport& r) {
  return json{{"pre", r.pre}, {"post", r.post}, {"delta", r.delta}, {"participants", r.participants}};
}

json to_json(const AuditReport& r) {
  json sessions = json::array();
  for (const auto& s : r.sessions) {
    sessions.push_back({{"label", s.label},
                        {"initial_minority", s.initial_minority},
                        {"revised_minority", s.revised_minority},
                        {"shift", s.shift}});
  }
  json skipped = json::array();
  for (const auto& [label, why] : r.skipped) skipped.push_back({{"label", label}, {"reason", why}});
  return json{{"method", r.method}, {"sessions", sessions}, {"skipped", skipped}, {"mean_shift", r.mean_shift}};
}

}  // namespace concord::analytics
