// Copyright 2026 The resdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "resdiff/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <json.hpp>
#include <stdexcept>

namespace resdiff {

namespace {

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <class U>
  void le(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i)
      out_.push_back(static_cast<std::uint8_t>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
  }
  void f32(const float* v, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) le(std::bit_cast<std::uint32_t>(v[i]));
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : b_(b) {}
  void need(std::size_t n) const {
    if (pos_ + n > b_.size()) throw std::runtime_error("checkpoint truncated");
  }
  template <class U>
  U le() {
    need(sizeof(U));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= std::uint64_t(b_[pos_ + i]) << (8 * i);
    pos_ += sizeof(U);
    return static_cast<U>(v);
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void f32(float* v, std::size_t n) {
    need(4 * n);
    for (std::size_t i = 0; i < n; ++i) v[i] = std::bit_cast<float>(le<std::uint32_t>());
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  const std::vector<std::uint8_t>& b_;
  std::size_t pos_ = 0;
};

nlohmann::ordered_json schedule_json(const ScheduleConfig& s) {
  nlohmann::ordered_json j;
  j["T"] = s.steps;
  j["p"] = s.p;
  j["kappa"] = s.kappa;
  j["eta1"] = s.eta_first;
  j["etaT"] = s.eta_last;
  j["first_step_weight"] = s.first_step_weight;
  return j;
}

ScheduleConfig schedule_from(const nlohmann::json& j) {
  ScheduleConfig s;
  s.steps = j.at("T").get<int>();
  s.p = j.at("p").get<double>();
  s.kappa = j.at("kappa").get<double>();
  s.eta_first = j.at("eta1").get<double>();
  s.eta_last = j.at("etaT").get<double>();
  s.first_step_weight = j.at("first_step_weight").get<double>();
  return s;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck) {
  nlohmann::ordered_json meta;
  meta["format"] = "resdiff-checkpoint";
  meta["model"] = nlohmann::ordered_json::parse(ck.params.config.to_json());
  meta["schedule"] = schedule_json(ck.schedule);
  meta["ddpm"] = {{"steps", ck.ddpm.steps},
                  {"beta_sq_start", ck.ddpm.beta_sq_start},
                  {"beta_sq_end", ck.ddpm.beta_sq_end}};
  if (ck.training) {
    meta["training"] = {{"step", ck.training->step},
                        {"adam_step", ck.training->adam.step},
                        {"rng", ck.training->rng.serialize()}};
  } else {
    meta["training"] = nullptr;
  }
  const std::string json = meta.dump();

  Writer w;
  w.bytes(kCheckpointMagic, 4);
  w.le<std::uint16_t>(kCheckpointVersion);
  w.le<std::uint16_t>(0);
  w.le<std::uint32_t>(static_cast<std::uint32_t>(json.size()));
  w.bytes(json.data(), json.size());
  w.le<std::uint32_t>(static_cast<std::uint32_t>(ck.params.entries.size()));
  for (const auto& e : ck.params.entries) {
    w.le<std::uint16_t>(static_cast<std::uint16_t>(e.name.size()));
    w.bytes(e.name.data(), e.name.size());
    w.le<std::uint64_t>(e.count);
    w.f32(ck.params.values.data() + e.offset, e.count);
  }
  w.le<std::uint8_t>(ck.training ? 1 : 0);
  if (ck.training) {
    const auto& a = ck.training->adam;
    if (a.m.size() != ck.params.count() || a.v.size() != ck.params.count())
      throw std::invalid_argument("optimizer state size mismatch");
    w.f32(a.m.data(), a.m.size());
    w.f32(a.v.data(), a.v.size());
  }
  return w.take();
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  if (r.str(4) != std::string(kCheckpointMagic, 4)) throw std::runtime_error("not a checkpoint");
  const auto version = r.le<std::uint16_t>();
  if (version != kCheckpointVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  r.le<std::uint16_t>();
  const auto json_len = r.le<std::uint32_t>();
  const auto meta = nlohmann::json::parse(r.str(json_len));

  Checkpoint ck;
  const DenoiserConfig cfg = DenoiserConfig::from_json(meta.at("model").dump());
  ck.params = init_params(cfg, 0);
  ck.schedule = schedule_from(meta.at("schedule"));
  ck.ddpm.steps = meta.at("ddpm").at("steps").get<int>();
  ck.ddpm.beta_sq_start = meta.at("ddpm").at("beta_sq_start").get<double>();
  ck.ddpm.beta_sq_end = meta.at("ddpm").at("beta_sq_end").get<double>();

  const auto n_entries = r.le<std::uint32_t>();
  if (n_entries != ck.params.entries.size())
    throw std::runtime_error("checkpoint/architecture mismatch: " + std::to_string(n_entries) +
                             " tensors stored, config implies " +
                             std::to_string(ck.params.entries.size()));
  for (const auto& e : ck.params.entries) {
    const auto name = r.str(r.le<std::uint16_t>());
    const auto count = r.le<std::uint64_t>();
    if (name != e.name || count != e.count)
      throw std::runtime_error("checkpoint/architecture mismatch at '" + name + "' (expected '" +
                               e.name + "')");
    r.f32(ck.params.values.data() + e.offset, e.count);
  }
  const bool has_opt = r.le<std::uint8_t>() != 0;
  if (has_opt) {
    const auto& tj = meta.at("training");
    TrainState st;
    st.step = tj.at("step").get<int>();
    st.adam.step = tj.at("adam_step").get<std::uint64_t>();
    st.rng = RngState::deserialize(tj.at("rng").get<std::string>());
    st.adam.m.resize(ck.params.count());
    st.adam.v.resize(ck.params.count());
    r.f32(st.adam.m.data(), st.adam.m.size());
    r.f32(st.adam.v.data(), st.adam.v.size());
    st.params = ck.params;
    ck.training = std::move(st);
  }
  if (!r.done()) throw std::runtime_error("trailing bytes after checkpoint payload");
  return ck;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  const auto bytes = encode_checkpoint(ck);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace resdiff
