#include "pbi/pbi.h"

#include <cstring>
#include <exception>
#include <memory>
#include <new>
#include <optional>
#include <string>

#include "json.hpp"
#include "pbi/graph.hpp"
#include "pbi/metrics.hpp"
#include "pbi/propagation.hpp"
#include "pbi/trainer.hpp"

struct pbi_graph {
  pbi::InteractionGraph graph;
  std::size_t duplicates = 0;
};

struct pbi_config {
  pbi::TrainConfig config;
};

struct pbi_model {
  pbi::Checkpoint ckpt;
};

namespace {

thread_local std::string last_error;

pbi_status fail(pbi_status status, const std::string& message) {
  last_error = message;
  return status;
}

// Maps the core's exception types onto status codes.
template <typename Fn>
pbi_status guarded(Fn&& fn) {
  try {
    fn();
    return PBI_OK;
  } catch (const pbi::InvalidArgument& e) {
    return fail(PBI_ERR_INVALID_ARGUMENT, e.what());
  } catch (const pbi::IoError& e) {
    return fail(PBI_ERR_IO, e.what());
  } catch (const pbi::ParseError& e) {
    return fail(PBI_ERR_PARSE, e.what());
  } catch (const pbi::ShapeMismatch& e) {
    return fail(PBI_ERR_SHAPE, e.what());
  } catch (const pbi::Diverged& e) {
    return fail(PBI_ERR_DIVERGED, e.what());
  } catch (const std::bad_alloc&) {
    return fail(PBI_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(PBI_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(PBI_ERR_INTERNAL, "unknown error");
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(const void* p, const char* what) {
  if (p == nullptr) throw pbi::InvalidArgument(std::string(what) + " must not be null");
}

void check_model_fits(const pbi_model* model, const pbi::InteractionGraph& g) {
  const auto& c = model->ckpt;
  if (c.num_users != g.num_users() || c.num_items != g.num_items()) {
    throw pbi::ShapeMismatch("checkpoint shape " + std::to_string(c.num_users) + " users x " +
                             std::to_string(c.num_items) + " items does not match graph shape " +
                             std::to_string(g.num_users()) + " users x " +
                             std::to_string(g.num_items()) + " items");
  }
}

pbi::Matrix final_embeddings(const pbi_model* model, const pbi::InteractionGraph& train) {
  check_model_fits(model, train);
  const auto op = pbi::PropagationOperator::build(train, model->ckpt.r);
  return pbi::propagate(op, model->ckpt.table);
}

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

extern "C" {

const char* pbi_version(void) { return "1.0.0"; }

const char* pbi_last_error(void) { return last_error.c_str(); }

const char* pbi_status_name(pbi_status status) {
  switch (status) {
    case PBI_OK: return "ok";
    case PBI_ERR_INVALID_ARGUMENT: return "invalid argument";
    case PBI_ERR_IO: return "io error";
    case PBI_ERR_PARSE: return "parse error";
    case PBI_ERR_SHAPE: return "shape mismatch";
    case PBI_ERR_DIVERGED: return "diverged";
    case PBI_ERR_INTERNAL: return "internal error";
  }
  return "unknown";
}

void pbi_string_free(char* s) { std::free(s); }

void pbi_set_log_handler(pbi_log_fn fn, void* user_data) {
  if (fn == nullptr) {
    pbi::set_log_sink(nullptr);
    return;
  }
  pbi::set_log_sink([fn, user_data](std::string_view m) { fn(std::string(m).c_str(), user_data); });
}

void pbi_set_threads(unsigned n) { pbi::set_worker_threads(n); }

// ---- graphs ----

pbi_status pbi_graph_load(const char* path, pbi_graph** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    pbi::LoadReport report;
    auto g = std::make_unique<pbi_graph>();
    g->graph = pbi::load_edge_list(path, &report);
    g->duplicates = report.duplicates;
    *out = g.release();
  });
}

pbi_status pbi_graph_load_pair(const char* train_path, const char* test_path,
                               pbi_graph** train_out, pbi_graph** test_out) {
  return guarded([&] {
    require(train_path, "train_path");
    require(test_path, "test_path");
    require(train_out, "train_out");
    require(test_out, "test_out");
    pbi::LoadReport tr;
    pbi::LoadReport te;
    auto pair = pbi::load_edge_list_pair(train_path, test_path, &tr, &te);
    auto a = std::make_unique<pbi_graph>();
    auto b = std::make_unique<pbi_graph>();
    a->graph = std::move(pair.train);
    a->duplicates = tr.duplicates;
    b->graph = std::move(pair.test);
    b->duplicates = te.duplicates;
    *train_out = a.release();
    *test_out = b.release();
  });
}

void pbi_graph_free(pbi_graph* graph) { delete graph; }

pbi_status pbi_graph_stats_get(const pbi_graph* graph, pbi_graph_stats* out) {
  return guarded([&] {
    require(graph, "graph");
    require(out, "out");
    const auto& g = graph->graph;
    out->num_users = g.num_users();
    out->num_items = g.num_items();
    out->num_edges = g.num_edges();
    out->duplicates_dropped = graph->duplicates;
    out->density = (g.num_users() > 0 && g.num_items() > 0) ? pbi::density(g) : 0.0;
  });
}

pbi_status pbi_graph_split(const pbi_graph* graph, double test_fraction, uint64_t seed,
                           pbi_graph** train_out, pbi_graph** test_out) {
  return guarded([&] {
    require(graph, "graph");
    require(train_out, "train_out");
    require(test_out, "test_out");
    auto split = pbi::split_holdout(graph->graph, test_fraction, seed);
    auto a = std::make_unique<pbi_graph>();
    auto b = std::make_unique<pbi_graph>();
    a->graph = std::move(split.train);
    b->graph = std::move(split.test);
    *train_out = a.release();
    *test_out = b.release();
  });
}

pbi_status pbi_graph_write(const pbi_graph* graph, const char* path) {
  return guarded([&] {
    require(graph, "graph");
    require(path, "path");
    pbi::write_edge_list(graph->graph, path);
  });
}

pbi_status pbi_graph_percentile_threshold(const pbi_graph* graph, double top_fraction,
                                          uint32_t* alpha_out) {
  return guarded([&] {
    require(graph, "graph");
    require(alpha_out, "alpha_out");
    *alpha_out = pbi::percentile_threshold(graph->graph, top_fraction);
  });
}

// ---- configuration ----

pbi_status pbi_config_new(pbi_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new pbi_config();
  });
}

void pbi_config_free(pbi_config* config) { delete config; }

pbi_status pbi_config_set(pbi_config* config, const char* key, const char* value) {
  return guarded([&] {
    require(config, "config");
    require(key, "key");
    require(value, "value");
    config->config.set(key, value);
  });
}

pbi_status pbi_config_get(const pbi_config* config, const char* key, char** value_out) {
  return guarded([&] {
    require(config, "config");
    require(key, "key");
    require(value_out, "value_out");
    *value_out = dup_string(config->config.get(key));
  });
}

pbi_status pbi_config_load_file(pbi_config* config, const char* path) {
  return guarded([&] {
    require(config, "config");
    require(path, "path");
    config->config = pbi::load_config_file(path, config->config);
  });
}

pbi_status pbi_config_to_text(const pbi_config* config, char** text_out) {
  return guarded([&] {
    require(config, "config");
    require(text_out, "text_out");
    *text_out = dup_string(config->config.to_text());
  });
}

const char* pbi_config_keys(void) {
  static const std::string keys = [] {
    std::string s;
    for (auto k : pbi::TrainConfig::keys()) {
      s += k;
      s += '\n';
    }
    return s;
  }();
  return keys.c_str();
}

pbi_status pbi_config_validate(const pbi_config* config) {
  return guarded([&] {
    require(config, "config");
    config->config.validate();
  });
}

// ---- training ----

pbi_status pbi_train(const pbi_graph* train, const pbi_graph* valid, const pbi_config* config,
                     pbi_epoch_fn on_epoch, void* user_data, pbi_model** model_out,
                     char** summary_json) {
  return guarded([&] {
    require(train, "train");
    require(config, "config");
    require(model_out, "model_out");
    if (valid != nullptr && (valid->graph.num_users() != train->graph.num_users() ||
                             valid->graph.num_items() != train->graph.num_items())) {
      throw pbi::ShapeMismatch("validation graph shape differs from training graph");
    }
    std::function<void(const pbi::EpochStats&)> cb;
    if (on_epoch != nullptr) {
      cb = [&](const pbi::EpochStats& s) { on_epoch(s.to_json().c_str(), user_data); };
    }
    auto result = valid != nullptr ? pbi::train(train->graph, &valid->graph, config->config, cb)
                                   : pbi::fit(train->graph, config->config, cb);
    auto model = std::make_unique<pbi_model>();
    model->ckpt.num_users = train->graph.num_users();
    model->ckpt.num_items = train->graph.num_items();
    model->ckpt.r = config->config.r;
    model->ckpt.table = std::move(result.best);
    if (summary_json != nullptr) {
      nlohmann::json s{{"best_epoch", result.best_epoch},
                       {"best_valid_ndcg", optional_json(result.best_valid_ndcg)},
                       {"epochs_run", result.history.size()},
                       {"stopped_early", result.stopped_early},
                       {"alpha", result.alpha}};
      *summary_json = dup_string(s.dump());
    }
    *model_out = model.release();
  });
}

pbi_status pbi_dump_triples(const pbi_graph* train, const pbi_config* config, const char* path) {
  return guarded([&] {
    require(train, "train");
    require(config, "config");
    require(path, "path");
    const auto& cfg = config->config;
    std::optional<pbi::SplitPair> carved;
    if (cfg.valid_fraction > 0.0) carved = pbi::carve_validation(train->graph, cfg.valid_fraction, cfg.seed);
    pbi::Trainer trainer(carved ? carved->train : train->graph, cfg);
    const auto [bpr, pbi_triples] = trainer.peek_triples();
    pbi::write_triples(bpr, path);
    pbi::write_triples(pbi_triples, path, /*append=*/true);
  });
}

void pbi_model_free(pbi_model* model) { delete model; }

pbi_status pbi_model_save(const pbi_model* model, const char* path) {
  return guarded([&] {
    require(model, "model");
    require(path, "path");
    pbi::save_checkpoint(model->ckpt, path);
  });
}

pbi_status pbi_model_load(const char* path, pbi_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    auto m = std::make_unique<pbi_model>();
    m->ckpt = pbi::load_checkpoint(path);
    *out = m.release();
  });
}

pbi_status pbi_model_shape(const pbi_model* model, uint64_t* num_users, uint64_t* num_items,
                           uint64_t* dim) {
  return guarded([&] {
    require(model, "model");
    if (num_users != nullptr) *num_users = model->ckpt.num_users;
    if (num_items != nullptr) *num_items = model->ckpt.num_items;
    if (dim != nullptr) *dim = model->ckpt.table.dim();
  });
}

pbi_status pbi_model_score(const pbi_model* model, const pbi_graph* train, uint32_t user,
                           uint32_t item, double* score_out) {
  return guarded([&] {
    require(model, "model");
    require(train, "train");
    require(score_out, "score_out");
    if (user >= train->graph.num_users() || item >= train->graph.num_items()) {
      throw pbi::InvalidArgument("user or item index out of range");
    }
    const auto h = final_embeddings(model, train->graph);
    *score_out = pbi::score(h, train->graph.num_users(), user, item);
  });
}

pbi_status pbi_checkpoint_inspect(const char* path, char** json_out) {
  return guarded([&] {
    require(path, "path");
    require(json_out, "json_out");
    const auto h = pbi::read_checkpoint_header(path);
    nlohmann::json j{{"magic", "PBIEMB1"},        {"num_users", h.num_users},
                     {"num_items", h.num_items},  {"dim", h.dim},
                     {"layers", h.layers},        {"r", h.r},
                     {"layer_weights", h.layer_weights}, {"file_size", h.file_size}};
    *json_out = dup_string(j.dump(2));
  });
}

// ---- evaluation ----

pbi_status pbi_evaluate(const pbi_model* model, const pbi_graph* train, const pbi_graph* test,
                        uint32_t k, const char* fingerprint, char** report_json) {
  return guarded([&] {
    require(model, "model");
    require(train, "train");
    require(test, "test");
    require(report_json, "report_json");
    check_model_fits(model, test->graph);
    const auto h = final_embeddings(model, train->graph);
    auto rep = pbi::evaluate(h, train->graph, test->graph, k);
    if (fingerprint != nullptr) rep.fingerprint = fingerprint;
    nlohmann::json j{{"k", rep.k},
                     {"f1", rep.f1},
                     {"ndcg", rep.ndcg},
                     {"map", rep.map},
                     {"pru", optional_json(rep.pru)},
                     {"pri", optional_json(rep.pri)},
                     {"n_users_evaluated", rep.n_users_evaluated},
                     {"n_users_skipped_pru", rep.n_users_skipped_pru},
                     {"n_items_evaluated_pri", rep.n_items_evaluated_pri},
                     {"fingerprint", rep.fingerprint}};
    *report_json = dup_string(j.dump(2));
  });
}

}  // extern "C"
