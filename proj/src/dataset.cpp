#include "textcausal/dataset.hpp"

#include <stdexcept>

#include "json.hpp"
#include "textcausal/io.hpp"
#include "textcausal/parallel.hpp"

namespace textcausal {

using ojson = nlohmann::ordered_json;

std::vector<StructuredSample> Dataset::structured() const {
  std::vector<StructuredSample> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.structured());
  return out;
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset out{meta, {}};
  out.records.reserve(indices.size());
  for (std::size_t i : indices) out.records.push_back(records.at(i));
  return out;
}

Dataset generate_dataset(const StructuredParams& structured, const TextGenerator& generator, std::size_t n,
                         Seed seed, std::size_t workers) {
  structured.validate();
  Dataset ds;
  ds.meta.dgp = generator.kind();
  ds.meta.source = generator.source();
  ds.meta.vocab = generator.vocab();
  ds.meta.structured = structured;
  ds.meta.effects = generator.config();
  ds.meta.sample_seed = seed;
  ds.meta.length = generator.length();
  ds.meta.word_tau_correlation = generator.word_orderings().achieved_tau_correlation;
  if (generator.second_orderings()) {
    ds.meta.second_tau_correlation = generator.second_orderings()->achieved_tau_correlation;
  }
  ds.records.resize(n);
  const Seed structured_seed = derive_seed(seed, "structured-draws");
  const Seed text_seed = derive_seed(seed, "text-draws");
  parallel_for(n, workers, [&](std::size_t i) {
    const auto s = draw_structured_one(structured, structured_seed, i);
    auto& r = ds.records[i];
    r.c = s.c;
    r.u = s.u;
    r.a = s.a;
    r.y = s.y;
    r.tokens = generator.generate(s.u, derive_seed(text_seed, i));
  });
  return ds;
}

namespace {

ojson effect_json(const EffectParams& p) { return ojson{{"tau", p.tau}, {"delta", p.delta}}; }

EffectParams effect_from(const ojson& j) {
  return EffectParams{j.at("tau").get<double>(), j.at("delta").get<double>()};
}

ojson structured_json(const StructuredParams& p) {
  ojson j;
  const KeyValueRecord rec = p.to_record();
  for (const auto& [k, v] : rec.entries()) j[k] = v;
  return j;
}

StructuredParams structured_from(const ojson& j) {
  KeyValueRecord rec;
  for (const auto& [k, v] : j.items()) rec.set(k, v.get<std::string>());
  return StructuredParams::from_record(rec);
}

}  // namespace

std::string serialize_dataset(const Dataset& dataset) {
  const auto& m = dataset.meta;
  ojson meta;
  meta["format"] = kDatasetFormat;
  meta["dgp"] = to_string(m.dgp);
  meta["source"] = m.source;
  meta["records"] = dataset.records.size();
  meta["length"] = m.length;
  meta["sample_seed"] = m.sample_seed;
  meta["ordering_seed"] = m.effects.ordering_seed;
  meta["effect_form"] = to_string(m.effects.form);
  meta["word_effect"] = effect_json(m.effects.word);
  meta["second_effect"] = m.effects.second ? effect_json(*m.effects.second) : ojson(nullptr);
  meta["word_tau_correlation"] = m.word_tau_correlation;
  meta["second_tau_correlation"] = m.second_tau_correlation ? ojson(*m.second_tau_correlation) : ojson(nullptr);
  meta["structured"] = structured_json(m.structured);
  meta["vocab"] = m.vocab.tokens();

  std::string out = meta.dump();
  out += '\n';
  for (const auto& r : dataset.records) {
    out += "{\"c\":";
    out += std::to_string(r.c);
    out += ",\"u\":";
    out += std::to_string(r.u);
    out += ",\"a\":";
    out += std::to_string(r.a);
    out += ",\"y\":";
    out += std::to_string(r.y);
    out += ",\"tokens\":[";
    for (std::size_t i = 0; i < r.tokens.ids.size(); ++i) {
      if (i) out += ',';
      out += std::to_string(r.tokens.ids[i]);
    }
    out += "]}\n";
  }
  return out;
}

Dataset parse_dataset(std::string_view text) {
  Dataset ds;
  std::size_t line_no = 0;
  std::size_t expected = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const ojson j = ojson::parse(line);
      if (line_no == 1) {
        if (j.at("format").get<std::string>() != kDatasetFormat) {
          throw std::runtime_error("unsupported format " + j.at("format").dump());
        }
        auto& m = ds.meta;
        m.dgp = dgp_from_string(j.at("dgp").get<std::string>());
        m.source = j.at("source").get<std::string>();
        expected = j.at("records").get<std::size_t>();
        m.length = j.at("length").get<std::size_t>();
        m.sample_seed = j.at("sample_seed").get<Seed>();
        m.effects.ordering_seed = j.at("ordering_seed").get<Seed>();
        m.effects.form = effect_form_from_string(j.at("effect_form").get<std::string>());
        m.effects.word = effect_from(j.at("word_effect"));
        if (!j.at("second_effect").is_null()) m.effects.second = effect_from(j.at("second_effect"));
        m.word_tau_correlation = j.at("word_tau_correlation").get<double>();
        if (!j.at("second_tau_correlation").is_null()) {
          m.second_tau_correlation = j.at("second_tau_correlation").get<double>();
        }
        m.structured = structured_from(j.at("structured"));
        m.vocab = Vocab(j.at("vocab").get<std::vector<std::string>>());
        ds.records.reserve(expected);
        continue;
      }
      DatasetRecord r;
      r.c = j.at("c").get<int>();
      r.u = j.at("u").get<int>();
      r.a = j.at("a").get<int>();
      r.y = j.at("y").get<int>();
      for (int v : {r.c, r.u, r.a, r.y}) {
        if (v != 0 && v != 1) throw std::runtime_error("binary field out of range");
      }
      r.tokens.ids = j.at("tokens").get<std::vector<TokenId>>();
      r.tokens.validate(ds.meta.vocab);
      ds.records.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw std::runtime_error("dataset line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (line_no == 0) throw std::runtime_error("dataset is empty");
  if (ds.records.size() != expected) {
    throw std::runtime_error("dataset declares " + std::to_string(expected) + " records but holds " +
                             std::to_string(ds.records.size()));
  }
  return ds;
}

void write_dataset(const std::filesystem::path& path, const Dataset& dataset) {
  write_file_atomic(path, serialize_dataset(dataset));
}

Dataset read_dataset(const std::filesystem::path& path) { return parse_dataset(read_file(path)); }

}  // namespace textcausal
