// Copyright 2026 The resdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "resdiff/model.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <stdexcept>

#include "resdiff/rng.hpp"

namespace resdiff {

using nn::Feature;

std::string objective_name(Objective o) { return o == Objective::X0 ? "x0" : "epsilon"; }

Objective parse_objective(const std::string& name) {
  if (name == "x0") return Objective::X0;
  if (name == "epsilon" || name == "eps") return Objective::Epsilon;
  throw std::invalid_argument("unknown objective '" + name + "'");
}

void DenoiserConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("denoiser config: " + m); };
  if (target_channels < 1) fail("out_channels must be >= 1");
  if (condition_channels < 1) fail("condition channels must be >= 1");
  if (base_width < 1) fail("base_width must be >= 1");
  if (num_levels < 1) fail("num_levels must be >= 1");
  if (num_levels > 8) fail("num_levels must be <= 8");
  if (blocks_per_level < 1) fail("blocks_per_level must be >= 1");
  if (time_embed_dim < 2 || time_embed_dim % 2 != 0) fail("time_embed_dim must be even and >= 2");
  if (max_groups < 1) fail("max_groups must be >= 1");
}

std::string DenoiserConfig::to_json() const {
  nlohmann::ordered_json j;
  j["in_channels"] = in_channels();
  j["out_channels"] = out_channels();
  j["condition_channels"] = condition_channels;
  j["base_width"] = base_width;
  j["num_levels"] = num_levels;
  j["blocks_per_level"] = blocks_per_level;
  j["time_embed_dim"] = time_embed_dim;
  j["attention_at_bottleneck"] = attention;
  j["max_groups"] = max_groups;
  j["objective"] = objective_name(objective);
  return j.dump();
}

DenoiserConfig DenoiserConfig::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  DenoiserConfig c;
  c.target_channels = j.at("out_channels").get<int>();
  c.condition_channels = j.at("condition_channels").get<int>();
  c.base_width = j.at("base_width").get<int>();
  c.num_levels = j.at("num_levels").get<int>();
  c.blocks_per_level = j.at("blocks_per_level").get<int>();
  c.time_embed_dim = j.at("time_embed_dim").get<int>();
  c.attention = j.at("attention_at_bottleneck").get<bool>();
  c.max_groups = j.at("max_groups").get<int>();
  c.objective = parse_objective(j.at("objective").get<std::string>());
  if (j.at("in_channels").get<int>() != c.in_channels())
    throw std::invalid_argument("denoiser config: in_channels inconsistent with channel counts");
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Layout

namespace layout_detail {

struct ConvP {
  nn::ConvShape shape;
  std::size_t w = 0, b = 0;
};
struct NormP {
  int channels = 0, groups = 1;
  std::size_t gain = 0, offset = 0;
};
struct LinearP {
  int in = 0, out = 0;
  std::size_t w = 0, b = 0;
};
struct ResBlockP {
  int in = 0, out = 0;
  NormP norm1;
  ConvP conv1;
  LinearP emb;
  NormP norm2;
  ConvP conv2;
  bool has_skip = false;
  ConvP skip;
};
struct AttnP {
  int channels = 0;
  NormP norm;
  ConvP qkv;
  ConvP proj;
};

class LayoutBuilder {
 public:
  explicit LayoutBuilder(std::vector<ParamEntry>& entries) : entries_(entries) {}

  std::size_t add(const std::string& name, std::size_t count, std::size_t fan_in, bool gain) {
    ParamEntry e;
    e.name = name;
    e.offset = total_;
    e.count = count;
    e.fan_in = fan_in;
    e.is_gain = gain;
    entries_.push_back(e);
    total_ += count;
    return e.offset;
  }

  ConvP conv(const std::string& name, int in, int out, int kernel, int stride = 1) {
    ConvP c;
    c.shape = {in, out, kernel, stride};
    const std::size_t fan_in = std::size_t(in) * kernel * kernel;
    c.w = add(name + ".weight", c.shape.weight_count(), fan_in, false);
    c.b = add(name + ".bias", std::size_t(out), fan_in, false);
    return c;
  }

  NormP norm(const std::string& name, int channels, int max_groups) {
    NormP n;
    n.channels = channels;
    n.groups = nn::group_count(channels, max_groups);
    n.gain = add(name + ".gain", std::size_t(channels), 0, true);
    n.offset = add(name + ".offset", std::size_t(channels), 0, false);
    return n;
  }

  LinearP linear(const std::string& name, int in, int out) {
    LinearP l{in, out, 0, 0};
    l.w = add(name + ".weight", std::size_t(in) * out, std::size_t(in), false);
    l.b = add(name + ".bias", std::size_t(out), std::size_t(in), false);
    return l;
  }

  ResBlockP resblock(const std::string& name, int in, int out, int emb_dim, int max_groups) {
    ResBlockP r;
    r.in = in;
    r.out = out;
    r.norm1 = norm(name + ".norm1", in, max_groups);
    r.conv1 = conv(name + ".conv1", in, out, 3);
    r.emb = linear(name + ".emb", emb_dim, 2 * out);
    r.norm2 = norm(name + ".norm2", out, max_groups);
    r.conv2 = conv(name + ".conv2", out, out, 3);
    r.has_skip = in != out;
    if (r.has_skip) r.skip = conv(name + ".skip", in, out, 1);
    return r;
  }

  AttnP attention(const std::string& name, int channels, int max_groups) {
    AttnP a;
    a.channels = channels;
    a.norm = norm(name + ".norm", channels, max_groups);
    a.qkv = conv(name + ".qkv", channels, 3 * channels, 1);
    a.proj = conv(name + ".proj", channels, channels, 1);
    return a;
  }

  std::size_t total() const { return total_; }

 private:
  std::vector<ParamEntry>& entries_;
  std::size_t total_ = 0;
};

}  // namespace layout_detail

using namespace layout_detail;

struct UNetLayout {
  DenoiserConfig config;
  std::vector<ParamEntry> entries;
  std::size_t total = 0;

  LinearP time1, time2;
  ConvP conv_in;
  std::vector<std::vector<ResBlockP>> enc;
  std::vector<ConvP> down;
  ResBlockP mid1, mid2;
  AttnP mid_attn;
  std::vector<std::vector<ResBlockP>> dec;
  std::vector<ConvP> up;  // up[l] maps level l to level l-1; up[0] unused
  NormP out_norm;
  ConvP conv_out;

  explicit UNetLayout(const DenoiserConfig& cfg) : config(cfg) {
    cfg.validate();
    LayoutBuilder b(entries);
    const int L = cfg.num_levels;
    const int D = cfg.time_embed_dim;
    const int G = cfg.max_groups;
    time1 = b.linear("time.fc1", D, D);
    time2 = b.linear("time.fc2", D, D);
    conv_in = b.conv("conv_in", cfg.in_channels(), cfg.width_at(0), 3);
    enc.resize(std::size_t(L));
    for (int l = 0; l < L; ++l) {
      int in = l == 0 ? cfg.width_at(0) : cfg.width_at(l - 1);
      for (int k = 0; k < cfg.blocks_per_level; ++k) {
        const std::string name = "enc." + std::to_string(l) + "." + std::to_string(k);
        enc[l].push_back(b.resblock(name, in, cfg.width_at(l), D, G));
        in = cfg.width_at(l);
      }
      if (l + 1 < L)
        down.push_back(b.conv("down." + std::to_string(l), cfg.width_at(l), cfg.width_at(l), 3, 2));
    }
    const int wb = cfg.width_at(L - 1);
    mid1 = b.resblock("mid.0", wb, wb, D, G);
    if (cfg.attention) mid_attn = b.attention("mid.attn", wb, G);
    mid2 = b.resblock("mid.1", wb, wb, D, G);
    dec.resize(std::size_t(L));
    up.resize(std::size_t(L));
    for (int l = L - 1; l >= 0; --l) {
      const int w = cfg.width_at(l);
      int in = 2 * w;
      for (int k = 0; k < cfg.blocks_per_level; ++k) {
        const std::string name = "dec." + std::to_string(l) + "." + std::to_string(k);
        dec[l].push_back(b.resblock(name, in, w, D, G));
        in = w;
      }
      if (l > 0) up[l] = b.conv("up." + std::to_string(l), w, cfg.width_at(l - 1), 3);
    }
    out_norm = b.norm("out.norm", cfg.width_at(0), G);
    conv_out = b.conv("out.conv", cfg.width_at(0), cfg.out_channels(), 3);
    total = b.total();
  }
};

namespace {

template <class T>
Feature<T> silu(const Feature<T>& x) {
  Feature<T> y(x.channels, x.height, x.width);
  nn::silu_forward(x.data, y.data);
  return y;
}

template <class T>
void add_into(Feature<T>& dst, const Feature<T>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst.data[i] += src.data[i];
}

template <class T>
Feature<T> conv(const ConvP& c, const T* p, const Feature<T>& x, nn::Workspace<T>& ws) {
  Feature<T> y;
  nn::conv2d_forward(c.shape, p + c.w, p + c.b, x, y, ws);
  return y;
}

template <class T>
Feature<T> norm(const NormP& n, const T* p, const Feature<T>& x, nn::NormCache<T>& cache) {
  Feature<T> y;
  nn::group_norm_forward(n.groups, p + n.gain, p + n.offset, x, y, cache);
  return y;
}

template <class T>
Feature<T> resblock_forward(const ResBlockP& r, const T* p, const Feature<T>& x,
                            const std::vector<T>& temb_act, ResBlockTrace<T>* tr,
                            nn::Workspace<T>& ws) {
  ResBlockTrace<T> local;
  ResBlockTrace<T>& t = tr != nullptr ? *tr : local;
  t.n1_out = norm(r.norm1, p, x, t.n1);
  t.a1 = silu(t.n1_out);
  Feature<T> h = conv(r.conv1, p, t.a1, ws);
  t.n2_out = norm(r.norm2, p, h, t.n2);
  nn::linear_forward(r.emb.in, r.emb.out, p + r.emb.w, p + r.emb.b, temb_act, t.mod);
  nn::modulate_forward(t.n2_out, t.mod.data(), t.mod.data() + r.out, t.m);
  t.a2 = silu(t.m);
  Feature<T> out = conv(r.conv2, p, t.a2, ws);
  if (r.has_skip)
    add_into(out, conv(r.skip, p, x, ws));
  else
    add_into(out, x);
  if (tr != nullptr) tr->x = x;
  return out;
}

template <class T>
Feature<T> resblock_backward(const ResBlockP& r, const T* p, const ResBlockTrace<T>& t,
                             const std::vector<T>& temb_act, const Feature<T>& dout, T* g,
                             std::vector<T>& dtemb_act, nn::Workspace<T>& ws) {
  Feature<T> da2;
  nn::conv2d_backward(r.conv2.shape, p + r.conv2.w, t.a2, dout, g + r.conv2.w, g + r.conv2.b, &da2,
                      ws);
  Feature<T> dm(da2.channels, da2.height, da2.width);
  nn::silu_backward(t.m.data, da2.data, dm.data);
  Feature<T> dn2;
  std::vector<T> dmod(std::size_t(2 * r.out), T(0));
  nn::modulate_backward(t.n2_out, t.mod.data(), dm, dmod.data(), dmod.data() + r.out, dn2);
  std::vector<T> de;
  nn::linear_backward(r.emb.in, r.emb.out, p + r.emb.w, temb_act, dmod, g + r.emb.w, g + r.emb.b,
                      &de);
  for (std::size_t i = 0; i < de.size(); ++i) dtemb_act[i] += de[i];
  Feature<T> dh;
  nn::group_norm_backward(r.norm2.groups, p + r.norm2.gain, t.n2, dn2, g + r.norm2.gain,
                          g + r.norm2.offset, dh);
  Feature<T> da1;
  nn::conv2d_backward(r.conv1.shape, p + r.conv1.w, t.a1, dh, g + r.conv1.w, g + r.conv1.b, &da1,
                      ws);
  Feature<T> dn1(da1.channels, da1.height, da1.width);
  nn::silu_backward(t.n1_out.data, da1.data, dn1.data);
  Feature<T> dx;
  nn::group_norm_backward(r.norm1.groups, p + r.norm1.gain, t.n1, dn1, g + r.norm1.gain,
                          g + r.norm1.offset, dx);
  if (r.has_skip) {
    Feature<T> dskip;
    nn::conv2d_backward(r.skip.shape, p + r.skip.w, t.x, dout, g + r.skip.w, g + r.skip.b, &dskip,
                        ws);
    add_into(dx, dskip);
  } else {
    add_into(dx, dout);
  }
  return dx;
}

template <class T>
Feature<T> attention_forward(const AttnP& a, const T* p, const Feature<T>& x, AttnTrace<T>* tr,
                             nn::Workspace<T>& ws) {
  AttnTrace<T> local;
  AttnTrace<T>& t = tr != nullptr ? *tr : local;
  t.hn = norm(a.norm, p, x, t.norm);
  t.qkv = conv(a.qkv, p, t.hn, ws);
  nn::attention_forward(a.channels, t.qkv, t.o, t.attn, ws);
  Feature<T> out = conv(a.proj, p, t.o, ws);
  add_into(out, x);
  return out;
}

template <class T>
Feature<T> attention_backward(const AttnP& a, const T* p, const AttnTrace<T>& t,
                              const Feature<T>& dout, T* g, nn::Workspace<T>& ws) {
  Feature<T> d_o;
  nn::conv2d_backward(a.proj.shape, p + a.proj.w, t.o, dout, g + a.proj.w, g + a.proj.b, &d_o, ws);
  Feature<T> dqkv;
  nn::attention_backward(a.channels, t.qkv, t.attn, d_o, dqkv, ws);
  Feature<T> dhn;
  nn::conv2d_backward(a.qkv.shape, p + a.qkv.w, t.hn, dqkv, g + a.qkv.w, g + a.qkv.b, &dhn, ws);
  Feature<T> dx;
  nn::group_norm_backward(a.norm.groups, p + a.norm.gain, t.norm, dhn, g + a.norm.gain,
                          g + a.norm.offset, dx);
  add_into(dx, dout);
  return dx;
}

template <class T>
thread_local nn::Workspace<T> tls_workspace;

}  // namespace

// ---------------------------------------------------------------------------
// Denoiser

template <class T>
Denoiser<T>::Denoiser(const DenoiserConfig& cfg) : layout_(std::make_unique<UNetLayout>(cfg)) {}
template <class T>
Denoiser<T>::~Denoiser() = default;
template <class T>
Denoiser<T>::Denoiser(Denoiser&&) noexcept = default;
template <class T>
Denoiser<T>& Denoiser<T>::operator=(Denoiser&&) noexcept = default;

template <class T>
const DenoiserConfig& Denoiser<T>::config() const {
  return layout_->config;
}
template <class T>
std::size_t Denoiser<T>::parameter_count() const {
  return layout_->total;
}
template <class T>
const std::vector<ParamEntry>& Denoiser<T>::entries() const {
  return layout_->entries;
}

template <class T>
Feature<T> Denoiser<T>::forward(const T* p, const Feature<T>& input, int t, Trace<T>* trace) const {
  const UNetLayout& L = *layout_;
  const DenoiserConfig& cfg = L.config;
  if (input.channels != cfg.in_channels())
    throw std::invalid_argument("denoiser: expected " + std::to_string(cfg.in_channels()) +
                                " input channels, got " + std::to_string(input.channels));
  if (input.height % cfg.size_multiple() != 0 || input.width % cfg.size_multiple() != 0)
    throw std::invalid_argument("denoiser: spatial size " + std::to_string(input.height) + "x" +
                                std::to_string(input.width) + " not divisible by " +
                                std::to_string(cfg.size_multiple()));
  nn::Workspace<T>& ws = tls_workspace<T>;
  Trace<T> local;
  Trace<T>& tr = trace != nullptr ? *trace : local;
  const bool keep = trace != nullptr;
  const int levels = cfg.num_levels;

  tr.emb0 = nn::timestep_embedding<T>(t, cfg.time_embed_dim);
  nn::linear_forward(L.time1.in, L.time1.out, p + L.time1.w, p + L.time1.b, tr.emb0, tr.e1);
  nn::silu_forward(tr.e1, tr.e1a);
  nn::linear_forward(L.time2.in, L.time2.out, p + L.time2.w, p + L.time2.b, tr.e1a, tr.temb);
  nn::silu_forward(tr.temb, tr.temb_act);

  if (keep) tr.input = input;
  Feature<T> h = conv(L.conv_in, p, input, ws);

  std::vector<Feature<T>> skips(static_cast<std::size_t>(levels));
  tr.enc.assign(std::size_t(levels), {});
  tr.down_in.assign(std::size_t(levels), {});
  for (int l = 0; l < levels; ++l) {
    if (keep) tr.enc[l].resize(L.enc[l].size());
    for (std::size_t k = 0; k < L.enc[l].size(); ++k)
      h = resblock_forward(L.enc[l][k], p, h, tr.temb_act, keep ? &tr.enc[l][k] : nullptr, ws);
    skips[l] = h;
    if (l + 1 < levels) {
      if (keep) tr.down_in[l] = h;
      h = conv(L.down[l], p, h, ws);
    }
  }

  h = resblock_forward(L.mid1, p, h, tr.temb_act, keep ? &tr.mid1 : nullptr, ws);
  if (cfg.attention) h = attention_forward(L.mid_attn, p, h, keep ? &tr.attn : nullptr, ws);
  h = resblock_forward(L.mid2, p, h, tr.temb_act, keep ? &tr.mid2 : nullptr, ws);

  tr.dec.assign(std::size_t(levels), {});
  tr.dec_skip_channels.assign(std::size_t(levels), 0);
  tr.up_in.assign(std::size_t(levels), {});
  for (int l = levels - 1; l >= 0; --l) {
    tr.dec_skip_channels[l] = h.channels;
    h = nn::concat(h, skips[l]);
    if (keep) tr.dec[l].resize(L.dec[l].size());
    for (std::size_t k = 0; k < L.dec[l].size(); ++k)
      h = resblock_forward(L.dec[l][k], p, h, tr.temb_act, keep ? &tr.dec[l][k] : nullptr, ws);
    if (l > 0) {
      Feature<T> upsampled;
      nn::upsample2x_forward(h, upsampled);
      h = conv(L.up[l], p, upsampled, ws);
      if (keep) tr.up_in[l] = std::move(upsampled);
    }
  }

  tr.out_norm_out = norm(L.out_norm, p, h, tr.out_norm);
  tr.out_act = silu(tr.out_norm_out);
  return conv(L.conv_out, p, tr.out_act, ws);
}

template <class T>
void Denoiser<T>::backward(const T* p, const Trace<T>& tr, const Feature<T>& d_output, T* g) const {
  const UNetLayout& L = *layout_;
  const DenoiserConfig& cfg = L.config;
  nn::Workspace<T>& ws = tls_workspace<T>;
  const int levels = cfg.num_levels;
  std::vector<T> dtemb_act(tr.temb_act.size(), T(0));

  Feature<T> d_act;
  nn::conv2d_backward(L.conv_out.shape, p + L.conv_out.w, tr.out_act, d_output, g + L.conv_out.w,
                      g + L.conv_out.b, &d_act, ws);
  Feature<T> d_norm(d_act.channels, d_act.height, d_act.width);
  nn::silu_backward(tr.out_norm_out.data, d_act.data, d_norm.data);
  Feature<T> dh;
  nn::group_norm_backward(L.out_norm.groups, p + L.out_norm.gain, tr.out_norm, d_norm,
                          g + L.out_norm.gain, g + L.out_norm.offset, dh);

  std::vector<Feature<T>> dskips(static_cast<std::size_t>(levels));
  for (int l = 0; l < levels; ++l) {
    if (l > 0) {
      Feature<T> dup;
      nn::conv2d_backward(L.up[l].shape, p + L.up[l].w, tr.up_in[l], dh, g + L.up[l].w,
                          g + L.up[l].b, &dup, ws);
      nn::upsample2x_backward(dup, dh);
    }
    for (std::size_t k = L.dec[l].size(); k-- > 0;)
      dh = resblock_backward(L.dec[l][k], p, tr.dec[l][k], tr.temb_act, dh, g, dtemb_act, ws);
    Feature<T> drun;
    nn::split(dh, tr.dec_skip_channels[l], drun, dskips[l]);
    dh = std::move(drun);
  }

  dh = resblock_backward(L.mid2, p, tr.mid2, tr.temb_act, dh, g, dtemb_act, ws);
  if (cfg.attention) dh = attention_backward(L.mid_attn, p, tr.attn, dh, g, ws);
  dh = resblock_backward(L.mid1, p, tr.mid1, tr.temb_act, dh, g, dtemb_act, ws);

  for (int l = levels - 1; l >= 0; --l) {
    if (l + 1 < levels) {
      Feature<T> ddown;
      nn::conv2d_backward(L.down[l].shape, p + L.down[l].w, tr.down_in[l], dh, g + L.down[l].w,
                          g + L.down[l].b, &ddown, ws);
      dh = std::move(ddown);
    }
    add_into(dh, dskips[l]);
    for (std::size_t k = L.enc[l].size(); k-- > 0;)
      dh = resblock_backward(L.enc[l][k], p, tr.enc[l][k], tr.temb_act, dh, g, dtemb_act, ws);
  }

  nn::conv2d_backward(L.conv_in.shape, p + L.conv_in.w, tr.input, dh, g + L.conv_in.w,
                      g + L.conv_in.b, static_cast<Feature<T>*>(nullptr), ws);

  std::vector<T> dtemb, de1a, de1;
  nn::silu_backward(tr.temb, dtemb_act, dtemb);
  nn::linear_backward(L.time2.in, L.time2.out, p + L.time2.w, tr.e1a, dtemb, g + L.time2.w,
                      g + L.time2.b, &de1a);
  nn::silu_backward(tr.e1, de1a, de1);
  nn::linear_backward(L.time1.in, L.time1.out, p + L.time1.w, tr.emb0, de1, g + L.time1.w,
                      g + L.time1.b, static_cast<std::vector<T>*>(nullptr));
}

template class Denoiser<float>;
template class Denoiser<double>;

// ---------------------------------------------------------------------------
// Parameters

const ParamEntry* DenoiserParams::find(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return &e;
  return nullptr;
}

bool DenoiserParams::all_finite() const {
  return std::all_of(values.begin(), values.end(), [](float v) { return std::isfinite(v); });
}

std::size_t parameter_count(const DenoiserConfig& cfg) { return UNetLayout(cfg).total; }

DenoiserParams init_params(const DenoiserConfig& cfg, std::uint64_t seed) {
  UNetLayout layout(cfg);
  DenoiserParams params;
  params.config = cfg;
  params.entries = layout.entries;
  params.values.assign(layout.total, 0.0f);
  for (std::size_t i = 0; i < params.entries.size(); ++i) {
    const ParamEntry& e = params.entries[i];
    float* v = params.values.data() + e.offset;
    if (e.is_gain) {
      std::fill_n(v, e.count, 1.0f);
    } else if (e.fan_in > 0) {
      RngState rng(mix_seed(seed) ^ mix_seed(i));
      const double bound = 1.0 / std::sqrt(double(e.fan_in));
      for (std::size_t j = 0; j < e.count; ++j)
        v[j] = static_cast<float>((2.0 * rng.uniform() - 1.0) * bound);
    }
  }
  return params;
}

// ---------------------------------------------------------------------------
// Conversions

template <class T>
Feature<T> to_feature(const ImageTensor& a) {
  Feature<T> f(a.channels(), a.height(), a.width());
  std::copy(a.data().begin(), a.data().end(), f.data.begin());
  return f;
}

template <class T>
Feature<T> to_feature(const ImageTensor& a, const ImageTensor& b) {
  if (a.height() != b.height() || a.width() != b.width())
    throw std::invalid_argument("x_t and condition are not spatially aligned: " +
                                a.shape_string() + " vs " + b.shape_string());
  Feature<T> f(a.channels() + b.channels(), a.height(), a.width());
  std::copy(a.data().begin(), a.data().end(), f.data.begin());
  std::copy(b.data().begin(), b.data().end(), f.data.begin() + static_cast<std::ptrdiff_t>(a.size()));
  return f;
}

template Feature<float> to_feature<float>(const ImageTensor&);
template Feature<double> to_feature<double>(const ImageTensor&);
template Feature<float> to_feature<float>(const ImageTensor&, const ImageTensor&);
template Feature<double> to_feature<double>(const ImageTensor&, const ImageTensor&);

ImageTensor to_image(const Feature<float>& f, ValueRange range) {
  ImageTensor out(f.channels, f.height, f.width, range);
  std::copy(f.data.begin(), f.data.end(), out.data().begin());
  return out;
}

ImageTensor predict(const Denoiser<float>& net, const DenoiserParams& params, const ImageTensor& x_t,
                    const ImageTensor& y0, int t) {
  if (!(params.config == net.config()))
    throw std::invalid_argument("parameters were built for a different architecture");
  const Feature<float> out = net.forward(params.values.data(), to_feature<float>(x_t, y0), t);
  return to_image(out, kSignedRange);
}

}  // namespace resdiff
