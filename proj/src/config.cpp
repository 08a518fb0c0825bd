#include "lsr/config.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "lsr/error.hpp"
#include "lsr/random.hpp"

namespace lsr {

using nlohmann::ordered_json;

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::top_k: return "top_k";
    case Strategy::top_p: return "top_p";
    case Strategy::min_p: return "min_p";
    case Strategy::min_p_plus: return "min_p_plus";
    case Strategy::min_p_plus_weighted: return "min_p_plus_weighted";
  }
  return "?";
}

Strategy parse_strategy(std::string_view s) {
  for (auto st : {Strategy::top_k, Strategy::top_p, Strategy::min_p, Strategy::min_p_plus,
                  Strategy::min_p_plus_weighted})
    if (to_string(st) == s) return st;
  throw config_error("unknown strategy '" + std::string(s) + "'");
}

KTarget KTarget::parse(std::string_view text) {
  if (text == "full" || text == "Full" || text == "FULL") return full();
  double k = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), k);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw config_error("k_target must be a number or 'full', got '" + std::string(text) + "'");
  if (!(k >= 1.0)) throw config_error("k_target must be >= 1");
  return value(k);
}

std::string KTarget::str() const {
  if (is_full()) return "full";
  std::ostringstream os;
  os << *k_;
  return os.str();
}

void ClassifierConfig::validate() const {
  if (!(learning_rate > 0.0)) throw config_error("classifier.learning_rate must be > 0");
  if (!(l2 >= 0.0)) throw config_error("classifier.l2 must be >= 0");
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0))
    throw config_error("classifier.holdout_fraction must be in (0,1)");
  if (max_epochs < 0) throw config_error("classifier.max_epochs must be >= 0");
  if (patience < 1) throw config_error("classifier.patience must be >= 1");
}

void MockParams::validate() const {
  auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in01(accuracy_at_full) || !in01(accuracy_at_two))
    throw config_error("mock accuracies must lie in [0,1]");
  if (accuracy_at_two < accuracy_at_full)
    throw config_error("mock accuracy_at_two must be >= accuracy_at_full");
}

void LlmConfig::validate() const {
  if (!(temperature >= 0.0)) throw config_error("llm.temperature must be >= 0");
  if (retries < 0) throw config_error("llm.retries must be >= 0");
  if (max_in_flight < 1) throw config_error("llm.max_in_flight must be >= 1");
  if (mode == LlmMode::live && endpoint.empty()) throw config_error("llm.endpoint is empty");
  mock.validate();
}

void RunConfig::validate() const {
  if (batch_size < 1) throw config_error("batch_size must be >= 1");
  if (iterations < 0) throw config_error("iterations must be >= 0");
  if (!k_target.is_full() && !(k_target.get() >= 1.0)) throw config_error("k_target must be >= 1");
  classifier.validate();
  llm.validate();
}

ordered_json to_json(const RunConfig& c) {
  ordered_json j;
  if (c.k_target.is_full())
    j["k_target"] = "full";
  else
    j["k_target"] = c.k_target.get();
  j["iterations"] = c.iterations;
  j["batch_size"] = c.batch_size;
  j["seed"] = c.seed;
  j["strategy"] = std::string(to_string(c.strategy));
  j["classifier"] = {{"learning_rate", c.classifier.learning_rate},
                     {"l2", c.classifier.l2},
                     {"max_epochs", c.classifier.max_epochs},
                     {"patience", c.classifier.patience},
                     {"holdout_fraction", c.classifier.holdout_fraction},
                     {"seed", c.classifier.seed},
                     {"class_weighting", c.classifier.class_weighting}};
  j["llm"] = {{"mode", c.llm.mode == LlmMode::live ? "live" : "mock"},
              {"endpoint", c.llm.endpoint},
              {"model", c.llm.model},
              {"api_key_env", c.llm.api_key_env},
              {"temperature", c.llm.temperature},
              {"max_in_flight", c.llm.max_in_flight},
              {"retries", c.llm.retries},
              {"backoff_base_seconds", c.llm.backoff_base_seconds},
              {"timeout_seconds", c.llm.timeout_seconds},
              {"log_requests", c.llm.log_requests},
              {"mock",
               {{"accuracy_at_full", c.llm.mock.accuracy_at_full},
                {"accuracy_at_two", c.llm.mock.accuracy_at_two},
                {"seed", c.llm.mock.seed}}}};
  return j;
}

namespace {

template <typename T>
void read(const ordered_json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("bad value for '") + key + "': " + e.what());
  }
}

}  // namespace

RunConfig run_config_from_json(const ordered_json& j) {
  if (!j.is_object()) throw config_error("config root must be an object");
  RunConfig c;
  if (j.contains("k_target")) {
    const auto& k = j.at("k_target");
    if (k.is_string())
      c.k_target = KTarget::parse(k.get<std::string>());
    else if (k.is_number())
      c.k_target = KTarget::value(k.get<double>());
    else
      throw config_error("k_target must be a number or \"full\"");
  }
  read(j, "iterations", c.iterations);
  read(j, "batch_size", c.batch_size);
  read(j, "seed", c.seed);
  if (j.contains("strategy")) c.strategy = parse_strategy(j.at("strategy").get<std::string>());

  c.classifier.seed = derive_seed(c.seed, "classifier");
  c.llm.mock.seed = derive_seed(c.seed, "mock");
  if (j.contains("classifier")) {
    const auto& cj = j.at("classifier");
    read(cj, "learning_rate", c.classifier.learning_rate);
    read(cj, "l2", c.classifier.l2);
    read(cj, "max_epochs", c.classifier.max_epochs);
    read(cj, "patience", c.classifier.patience);
    read(cj, "holdout_fraction", c.classifier.holdout_fraction);
    read(cj, "seed", c.classifier.seed);
    read(cj, "class_weighting", c.classifier.class_weighting);
  }
  if (j.contains("llm")) {
    const auto& lj = j.at("llm");
    if (lj.contains("mode")) {
      const auto mode = lj.at("mode").get<std::string>();
      if (mode == "live")
        c.llm.mode = LlmMode::live;
      else if (mode == "mock")
        c.llm.mode = LlmMode::mock;
      else
        throw config_error("llm.mode must be 'live' or 'mock'");
    }
    read(lj, "endpoint", c.llm.endpoint);
    read(lj, "model", c.llm.model);
    read(lj, "api_key_env", c.llm.api_key_env);
    read(lj, "temperature", c.llm.temperature);
    read(lj, "max_in_flight", c.llm.max_in_flight);
    read(lj, "retries", c.llm.retries);
    read(lj, "backoff_base_seconds", c.llm.backoff_base_seconds);
    read(lj, "timeout_seconds", c.llm.timeout_seconds);
    read(lj, "log_requests", c.llm.log_requests);
    if (lj.contains("mock")) {
      const auto& mj = lj.at("mock");
      read(mj, "accuracy_at_full", c.llm.mock.accuracy_at_full);
      read(mj, "accuracy_at_two", c.llm.mock.accuracy_at_two);
      read(mj, "seed", c.llm.mock.seed);
    }
  }
  c.validate();
  return c;
}

void apply_override(ordered_json& j, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw config_error("override must look like key.path=value, got '" + std::string(assignment) + "'");
  const std::string path(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));

  // The default config doubles as the key schema.
  ordered_json schema = to_json(RunConfig{});
  ordered_json* node = &j;
  const ordered_json* snode = &schema;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!snode->is_object() || !snode->contains(key))
      throw config_error("unknown config key '" + path + "'");
    snode = &snode->at(key);
    if (dot == std::string::npos) {
      if (snode->is_object()) throw config_error("config key '" + path + "' is a section");
      ordered_json value = ordered_json::parse(text, nullptr, false);
      if (value.is_discarded()) value = text;
      (*node)[key] = value;
      return;
    }
    if (!node->contains(key) || !(*node)[key].is_object()) (*node)[key] = ordered_json::object();
    node = &(*node)[key];
    start = dot + 1;
  }
}

}  // namespace lsr
