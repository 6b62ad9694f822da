#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>

#include "specmark/corpus.hpp"
#include "specmark/errors.hpp"
#include "specmark/spectral.hpp"
#include "specmark/tinynet.hpp"
#include "specmark/watermark.hpp"

namespace specmark {

// Every pipeline default in one place. Overridable from a flat key=value
// file ('#' comments) and again from command-line flags.
struct PipelineConfig {
  int sample_rate = 22050;
  MelConfig mel;

  int T = 50;
  double beta_min = 1e-4;
  double beta_max = 0.05;
  double sigma_d = 0.3;

  EmbedConfig embed;
  std::size_t n_bits = 100;
  bool use_diffusion = false;

  TrainConfig train;

  std::string chain = "";
  std::string payload_path = "";
  std::string outdir = ".";
  std::uint64_t seed = 1;

  int gl_iters = 32;
  double fpr_bound = 1e-3;

  CorpusParams corpus;
  std::size_t corpus_count = 8;
};

inline Band parse_band(const std::string& s) {
  if (s == "LL" || s == "ll") return Band::LL;
  if (s == "LH" || s == "lh") return Band::LH;
  if (s == "HL" || s == "hl") return Band::HL;
  if (s == "HH" || s == "hh") return Band::HH;
  throw InvalidConfig("unknown sub-band '" + s + "'");
}

inline const char* band_name(Band b) {
  switch (b) {
    case Band::LL: return "LL";
    case Band::LH: return "LH";
    case Band::HL: return "HL";
    default: return "HH";
  }
}

inline void apply_config_entry(PipelineConfig& cfg, const std::string& key,
                               const std::string& value) {
  auto as_int = [&] { return std::stoi(value); };
  auto as_u64 = [&] { return static_cast<std::uint64_t>(std::stoull(value, nullptr, 0)); };
  auto as_double = [&] { return std::stod(value); };
  if (key == "sample_rate") cfg.sample_rate = as_int();
  else if (key == "n_fft") cfg.mel.n_fft = as_int();
  else if (key == "hop") cfg.mel.hop = as_int();
  else if (key == "n_mels") cfg.mel.n_mels = as_int();
  else if (key == "fmin") cfg.mel.fmin = as_double();
  else if (key == "fmax") cfg.mel.fmax = as_double();
  else if (key == "T") cfg.T = as_int();
  else if (key == "beta_min") cfg.beta_min = as_double();
  else if (key == "beta_max") cfg.beta_max = as_double();
  else if (key == "sigma_d") cfg.sigma_d = as_double();
  else if (key == "alpha") cfg.embed.alpha = as_double();
  else if (key == "subband") cfg.embed.subband = parse_band(value);
  else if (key == "embed_step") cfg.embed.embed_step = as_int();
  else if (key == "key") cfg.embed.key = as_u64();
  else if (key == "bits") cfg.n_bits = static_cast<std::size_t>(as_int());
  else if (key == "use_diffusion") cfg.use_diffusion = (value == "1" || value == "true");
  else if (key == "lr") cfg.train.lr = as_double();
  else if (key == "lambda_emb") cfg.train.lambda_emb = as_double();
  else if (key == "lambda_ext") cfg.train.lambda_ext = as_double();
  else if (key == "lambda_tts") cfg.train.lambda_tts = as_double();
  else if (key == "steps") cfg.train.steps = as_int();
  else if (key == "anneal_start") cfg.train.alpha_anneal.first = as_double();
  else if (key == "anneal_end") cfg.train.alpha_anneal.second = as_double();
  else if (key == "chain") cfg.chain = value;
  else if (key == "payload") cfg.payload_path = value;
  else if (key == "outdir") cfg.outdir = value;
  else if (key == "seed") cfg.seed = as_u64();
  else if (key == "gl_iters") cfg.gl_iters = as_int();
  else if (key == "fpr") cfg.fpr_bound = as_double();
  else if (key == "corpus_rows") cfg.corpus.rows = static_cast<std::size_t>(as_int());
  else if (key == "corpus_cols") cfg.corpus.cols = static_cast<std::size_t>(as_int());
  else if (key == "corpus_count") cfg.corpus_count = static_cast<std::size_t>(as_int());
  else if (key == "texture_lh") cfg.corpus.texture_lh = as_double();
  else if (key == "texture_hl") cfg.corpus.texture_hl = as_double();
  else if (key == "texture_hh") cfg.corpus.texture_hh = as_double();
  else throw InvalidConfig("config: unknown key '" + key + "'");
}

inline void load_config_file(PipelineConfig& cfg, const std::string& path) {
  std::ifstream f(path);
  if (!f) throw FormatError("config: cannot open " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw FormatError("config: line " + std::to_string(lineno) + " is not key=value");
    try {
      apply_config_entry(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const std::invalid_argument&) {
      throw FormatError("config: bad value at line " + std::to_string(lineno));
    }
  }
}

}  // namespace specmark
