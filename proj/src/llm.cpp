#include "lsr/llm.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "lsr/chat_client.hpp"
#include "lsr/ingest.hpp"
#include "lsr/random.hpp"

namespace lsr {

using nlohmann::json;

// ---------------------------------------------------------------- prompt

std::string build_prompt(std::span<const BatchCase> cases, const LabelSpace& labels,
                         std::span<const LabelId> label_order) {
  if (cases.empty()) throw data_error("cannot build a prompt for an empty batch");
  const bool with_suggestions = cases.front().candidates.has_value();
  for (const auto& c : cases)
    if (c.candidates.has_value() != with_suggestions)
      throw data_error("suggestions must be given for every case in a batch or for none");
  if (!label_order.empty() && label_order.size() != labels.size())
    throw data_error("label order does not cover the label space");

  std::string out;
  out += "### Context ###\n";
  out += "Your goal is to predict the correct category given the context for each case.\n";
  out += "The categories are: [";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i) out += ", ";
    out += labels.name(label_order.empty() ? static_cast<LabelId>(i) : label_order[i]);
  }
  out += "]\n\n";
  out += "### Instructions ###\n";
  out += "1. Write down your thinking in a step-by-step way.\n";
  out += "2. You MUST pick one of the suggested categories.\n";
  out += "3. Your output must be in JSON format structured as follows: \n";
  out += "   {\"predictions\": [{\"Case\": 0, \"Analysis\": \"...\", \"Label\": \"...\"}, ...]}\n";
  out += "4. You must analyze all cases individually.\n\n";
  out += "### Cases ###\n";
  for (std::size_t i = 0; i < cases.size(); ++i) {
    out += "Case " + std::to_string(i) + ": " + render_semantic(*cases[i].record);
    if (with_suggestions) {
      out += ", suggestions: [";
      const auto& cand = *cases[i].candidates;
      for (std::size_t j = 0; j < cand.size(); ++j) {
        if (j) out += ", ";
        out += "'" + labels.name(cand[j]) + "'";
      }
      out += "]";
    }
    out += "\n";
  }
  return out;
}

std::string build_prompt(std::span<const SampleRecord> batch, const LabelSpace& labels,
                         const std::vector<CandidateSet>* suggestions, std::span<const LabelId> label_order) {
  if (suggestions && suggestions->size() != batch.size())
    throw data_error("suggestion count " + std::to_string(suggestions->size()) + " does not match batch size " +
                     std::to_string(batch.size()));
  std::vector<BatchCase> cases;
  cases.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    BatchCase c{&batch[i], i, std::nullopt};
    if (suggestions) c.candidates = (*suggestions)[i].labels;
    cases.push_back(std::move(c));
  }
  return build_prompt(cases, labels, label_order);
}

// ---------------------------------------------------------------- parsing

namespace {

// End of the brace-balanced object starting at `start`, honoring strings.
std::optional<std::size_t> object_end(std::string_view text, std::size_t start) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = start; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped)
        escaped = false;
      else if (c == '\\')
        escaped = true;
      else if (c == '"')
        in_string = false;
      continue;
    }
    if (c == '"')
      in_string = true;
    else if (c == '{')
      ++depth;
    else if (c == '}' && --depth == 0)
      return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> case_number(const json& v) {
  if (v.is_number_unsigned()) return v.get<std::size_t>();
  if (v.is_number_integer() && v.get<long long>() >= 0) return static_cast<std::size_t>(v.get<long long>());
  if (v.is_string()) {
    auto s = v.get<std::string>();
    if (const auto sp = s.find_last_of(' '); sp != std::string::npos) s = s.substr(sp + 1);  // "Case 3"
    try {
      std::size_t used = 0;
      const auto n = std::stoul(s, &used);
      if (used == s.size()) return n;
    } catch (const std::exception&) {
    }
  }
  return std::nullopt;
}

}  // namespace

std::vector<CasePrediction> parse_response(std::string_view text, std::optional<std::size_t> expected_cases) {
  std::optional<json> payload;
  for (std::size_t pos = text.find('{'); pos != std::string_view::npos; pos = text.find('{', pos + 1)) {
    const auto end = object_end(text, pos);
    if (!end) continue;
    json j = json::parse(text.substr(pos, *end - pos + 1), nullptr, false);
    if (!j.is_discarded() && j.is_object() && j.contains("predictions")) {
      payload = std::move(j);
      break;
    }
  }
  if (!payload) throw llm_error("no JSON object with \"predictions\" found in the response");
  const auto& preds = payload->at("predictions");
  if (!preds.is_array()) throw llm_error("\"predictions\" is not an array");

  std::vector<CasePrediction> out;
  std::set<std::size_t> seen;
  for (const auto& entry : preds) {
    if (!entry.is_object() || !entry.contains("Case") || !entry.contains("Label"))
      throw llm_error("prediction entry is missing \"Case\" or \"Label\"");
    const auto idx = case_number(entry.at("Case"));
    if (!idx) throw llm_error("prediction entry has a non-numeric \"Case\"");
    if (expected_cases && *idx >= *expected_cases) continue;
    if (!seen.insert(*idx).second) continue;
    CasePrediction cp;
    cp.case_index = *idx;
    const auto& label = entry.at("Label");
    cp.raw_label = label.is_string() ? label.get<std::string>() : label.dump();
    if (entry.contains("Analysis"))
      cp.analysis = entry.at("Analysis").is_string() ? entry.at("Analysis").get<std::string>()
                                                     : entry.at("Analysis").dump();
    out.push_back(std::move(cp));
  }
  if (expected_cases) {
    std::string missing;
    for (std::size_t i = 0; i < *expected_cases; ++i)
      if (!seen.count(i)) missing += (missing.empty() ? "" : ",") + std::to_string(i);
    if (!missing.empty()) throw llm_error("missing cases {" + missing + "}");
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.case_index < b.case_index; });
  return out;
}

std::string serialize_predictions(std::span<const CasePrediction> predictions) {
  json arr = json::array();
  for (const auto& p : predictions)
    arr.push_back({{"Case", p.case_index}, {"Analysis", p.analysis}, {"Label", p.raw_label}});
  return json{{"predictions", arr}}.dump();
}

namespace {

std::string strip_quotes(std::string s) {
  auto is_quote = [](char c) { return c == '"' || c == '\'' || c == '`'; };
  while (s.size() >= 2 && is_quote(s.front()) && is_quote(s.back())) s = s.substr(1, s.size() - 2);
  return s;
}

}  // namespace

std::optional<LabelId> match_label(std::string_view raw, const LabelSpace& labels,
                                   const std::vector<LabelId>* candidates) {
  for (LabelId id = 0; id < labels.size(); ++id)
    if (labels.name(id) == raw) return id;

  const std::string norm = normalize_label(strip_quotes(normalize_label(raw)));
  if (norm.empty()) return std::nullopt;
  if (auto id = labels.find_normalized(norm)) return id;

  auto unique_substring = [&](const std::vector<LabelId>& pool) -> std::optional<LabelId> {
    std::optional<LabelId> hit;
    for (auto id : pool) {
      const auto name = normalize_label(labels.name(id));
      if (norm.find(name) != std::string::npos || name.find(norm) != std::string::npos) {
        if (hit) return std::nullopt;
        hit = id;
      }
    }
    return hit;
  };
  std::vector<LabelId> all(labels.size());
  for (LabelId id = 0; id < labels.size(); ++id) all[id] = id;
  if (candidates) {
    if (auto id = unique_substring(*candidates)) return id;
  }
  return unique_substring(all);
}

// ---------------------------------------------------------------- mock

double mock_accuracy(std::size_t set_size, std::size_t num_classes, const MockParams& params) {
  if (set_size <= 2 || num_classes <= 2) return params.accuracy_at_two;
  if (set_size >= num_classes) return params.accuracy_at_full;
  const double t = (std::log(static_cast<double>(set_size)) - std::log(2.0)) /
                   (std::log(static_cast<double>(num_classes)) - std::log(2.0));
  return params.accuracy_at_two + t * (params.accuracy_at_full - params.accuracy_at_two);
}

std::vector<CasePrediction> mock_llm(std::span<const BatchCase> cases, const LabelSpace& labels,
                                     const MockParams& params, const LabelingContext& context) {
  std::vector<CasePrediction> out;
  out.reserve(cases.size());
  std::vector<LabelId> full(labels.size());
  for (LabelId id = 0; id < labels.size(); ++id) full[id] = id;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& c = cases[i];
    if (!c.record->truth) throw data_error("mock LLM needs ground truth for record '" + c.record->id + "'");
    const auto& set = c.candidates ? *c.candidates : full;
    if (set.empty()) throw data_error("empty candidate set for record '" + c.record->id + "'");
    const LabelId truth = *c.record->truth;

    Rng rng(derive_seed(params.seed, "mock-case", hash_string(c.record->id),
                        static_cast<std::uint64_t>(context.iteration), static_cast<std::uint64_t>(context.draw)));
    const double u = rng.uniform();
    LabelId choice;
    if (std::find(set.begin(), set.end(), truth) != set.end()) {
      std::vector<LabelId> wrong;
      for (auto id : set)
        if (id != truth) wrong.push_back(id);
      if (u < mock_accuracy(set.size(), labels.size(), params) || wrong.empty())
        choice = truth;
      else
        choice = wrong[rng.below(wrong.size())];
    } else {
      choice = set[rng.below(set.size())];
    }
    out.push_back({i, "simulated", labels.name(choice), choice});
  }
  return out;
}

BatchOutcome MockLabeler::label_batch(std::span<const BatchCase> cases, const LabelSpace& labels,
                                      const LabelingContext& context) {
  return {mock_llm(cases, labels, params_, context), {}};
}

// ---------------------------------------------------------------- live

LiveLabeler::LiveLabeler(std::shared_ptr<ChatClient> client, LlmConfig config)
    : client_(std::move(client)), config_(std::move(config)) {}

BatchOutcome LiveLabeler::label_batch(std::span<const BatchCase> cases, const LabelSpace& labels,
                                      const LabelingContext& context) {
  const std::string prompt = build_prompt(cases, labels, context.label_order);
  BatchOutcome outcome;
  std::vector<CasePrediction> parsed;
  std::string last_text;
  bool complete = false;
  for (int attempt = 0; attempt <= config_.retries && !complete; ++attempt) {
    last_text = client_->complete(prompt, context.temperature);
    try {
      parsed = parse_response(last_text, cases.size());
      complete = true;
    } catch (const Error& e) {
      outcome.events.push_back(std::string("parse-retry: ") + e.what());
    }
  }
  if (!complete) {
    try {
      parsed = parse_response(last_text);
    } catch (const Error&) {
      parsed.clear();
    }
  }

  outcome.cases.resize(cases.size());
  for (std::size_t i = 0; i < cases.size(); ++i) outcome.cases[i].case_index = i;
  for (auto& p : parsed) {
    if (p.case_index >= cases.size()) continue;
    const auto* cand = cases[p.case_index].candidates ? &*cases[p.case_index].candidates : nullptr;
    p.label = match_label(p.raw_label, labels, cand);
    outcome.cases[p.case_index] = std::move(p);
  }
  return outcome;
}

std::unique_ptr<Labeler> make_labeler(const LlmConfig& config, std::function<void(const std::string&)> request_log) {
  if (config.mode == LlmMode::mock) return std::make_unique<MockLabeler>(config.mock, config.max_in_flight);
  auto client = ChatClient::from_environment(config);
  if (request_log) client->set_request_log(std::move(request_log));
  return std::make_unique<LiveLabeler>(std::move(client), config);
}

}  // namespace lsr
