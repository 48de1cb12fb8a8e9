// sastnet/fusion.hpp
//
// Copyright 2026 The sastnet authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.
//
// Cross-modal fusion: both streams are projected to a common width, then
// three two-layer cross-attention stacks run — semantic queries over
// acoustic keys/values, acoustic queries over semantic keys/values, and a
// fusion stack where the acoustic-query stream attends to the
// semantic-query stream. Output lengths follow the query side. Attention
// maps at every stage and layer can be captured for export without
// perturbing the forward values.

#ifndef SASTNET_FUSION_HPP_
#define SASTNET_FUSION_HPP_

#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "sastnet/checkpoint.hpp"
#include "sastnet/nn.hpp"

namespace sastnet {

enum class FusionStage { kSemAttendsAc, kAcAttendsSem, kFusion };

inline const char* to_string(FusionStage s) {
  switch (s) {
    case FusionStage::kSemAttendsAc: return "sa";
    case FusionStage::kAcAttendsSem: return "as";
    case FusionStage::kFusion: return "fusion";
  }
  throw ContractError("unknown fusion stage");
}

inline FusionStage parse_fusion_stage(const std::string& s) {
  if (s == "sa") return FusionStage::kSemAttendsAc;
  if (s == "as") return FusionStage::kAcAttendsSem;
  if (s == "fusion") return FusionStage::kFusion;
  throw UsageError("unknown fusion stage: '" + s + "' (expected sa|as|fusion)");
}

struct FusionConfig {
  Index d_sem = 64;    // incoming semantic width
  Index d_ac = 64;     // incoming acoustic width
  Index d_model = 64;  // common attention width
  Index n_heads = 4;
  Index d_ff = 256;
  int n_layers = 2;

  void validate() const {
    if (d_sem <= 0 || d_ac <= 0 || d_model <= 0)
      throw ContractError("FusionConfig: widths must be positive");
    if (n_heads <= 0 || d_model % n_heads != 0)
      throw ContractError("FusionConfig: d_model must be divisible by n_heads");
    if (n_layers < 1) throw ContractError("FusionConfig: need >= 1 layer");
  }
};

// Captured attention: per stage, per layer, one matrix per head with rows
// softmax-normalized over keys.
template <class S>
struct FusionCaptureT {
  std::vector<std::vector<Mat<S>>> sem_attends_ac;  // [layer][head]
  std::vector<std::vector<Mat<S>>> ac_attends_sem;
  std::vector<std::vector<Mat<S>>> fusion;
};
using FusionCapture = FusionCaptureT<float>;

template <class S>
struct AttentionMapT {
  FusionStage stage = FusionStage::kFusion;
  int layer = 0;
  std::vector<Mat<S>> heads;  // each L_q x L_k
};
using AttentionMap = AttentionMapT<float>;

template <class S>
struct FusionOutT {
  int o_sa = -1;      // L_s x d_model
  int o_as = -1;      // L_a x d_model
  int o_fusion = -1;  // L_a x d_model
};
using FusionOut = FusionOutT<float>;

template <class S>
class FusionModuleT {
 public:
  FusionModuleT() = default;

  FusionModuleT(ParamStore<S>& ps, const std::string& prefix, FusionConfig cfg)
      : cfg_(std::move(cfg)) {
    cfg_.validate();
    proj_sem_ = LinearM<S>(ps, prefix + ".proj_sem", cfg_.d_sem, cfg_.d_model);
    proj_ac_ = LinearM<S>(ps, prefix + ".proj_ac", cfg_.d_ac, cfg_.d_model);
    for (int l = 0; l < cfg_.n_layers; ++l) {
      const std::string n = std::to_string(l);
      sa_layers_.emplace_back(ps, prefix + ".sa" + n, cfg_.d_model, cfg_.n_heads,
                              cfg_.d_ff);
      as_layers_.emplace_back(ps, prefix + ".as" + n, cfg_.d_model, cfg_.n_heads,
                              cfg_.d_ff);
      fuse_layers_.emplace_back(ps, prefix + ".fuse" + n, cfg_.d_model,
                                cfg_.n_heads, cfg_.d_ff);
    }
  }

  const FusionConfig& config() const { return cfg_; }

  // o_sem: L_s x d_sem, o_ac: L_a x d_ac. Output lengths follow the query
  // side: |o_sa| = L_s, |o_as| = |o_fusion| = L_a.
  FusionOutT<S> forward(Tape<S>& t, Binding<S>& bind, ParamStore<S>& ps,
                        int o_sem, int o_ac,
                        FusionCaptureT<S>* cap = nullptr) const {
    if (t.val(o_sem).cols() != cfg_.d_sem)
      throw ContractError("FusionModule: semantic width mismatch, got " +
                          std::to_string(t.val(o_sem).cols()));
    if (t.val(o_ac).cols() != cfg_.d_ac)
      throw ContractError("FusionModule: acoustic width mismatch, got " +
                          std::to_string(t.val(o_ac).cols()));
    const std::size_t n = static_cast<std::size_t>(cfg_.n_layers);
    if (cap) {
      cap->sem_attends_ac.assign(n, {});
      cap->ac_attends_sem.assign(n, {});
      cap->fusion.assign(n, {});
    }

    const int s = proj_sem_(t, bind, ps, o_sem);
    const int a = proj_ac_(t, bind, ps, o_ac);

    FusionOutT<S> out;
    out.o_sa = s;
    for (std::size_t l = 0; l < n; ++l)
      out.o_sa = sa_layers_[l](t, bind, ps, out.o_sa, a,
                               cap ? &cap->sem_attends_ac[l] : nullptr);
    out.o_as = a;
    for (std::size_t l = 0; l < n; ++l)
      out.o_as = as_layers_[l](t, bind, ps, out.o_as, s,
                               cap ? &cap->ac_attends_sem[l] : nullptr);
    out.o_fusion = out.o_as;
    for (std::size_t l = 0; l < n; ++l)
      out.o_fusion = fuse_layers_[l](t, bind, ps, out.o_fusion, out.o_sa,
                                     cap ? &cap->fusion[l] : nullptr);
    return out;
  }

 private:
  FusionConfig cfg_;
  LinearM<S> proj_sem_, proj_ac_;
  std::vector<CrossLayerM<S>> sa_layers_, as_layers_, fuse_layers_;
};
using FusionModule = FusionModuleT<float>;

// Pulls one stage/layer out of a capture. Errors when capture was not
// enabled for that stage or the layer is out of range.
template <class S>
AttentionMapT<S> export_attention(const FusionCaptureT<S>& cap,
                                  FusionStage stage, int layer) {
  const std::vector<std::vector<Mat<S>>>* stack = nullptr;
  switch (stage) {
    case FusionStage::kSemAttendsAc: stack = &cap.sem_attends_ac; break;
    case FusionStage::kAcAttendsSem: stack = &cap.ac_attends_sem; break;
    case FusionStage::kFusion: stack = &cap.fusion; break;
  }
  if (stack->empty())
    throw ContractError("export_attention: capture was not enabled");
  if (layer < 0 || layer >= static_cast<int>(stack->size()))
    throw ContractError("export_attention: layer " + std::to_string(layer) +
                        " out of range [0, " + std::to_string(stack->size()) +
                        ")");
  const auto& heads = (*stack)[static_cast<std::size_t>(layer)];
  if (heads.empty())
    throw ContractError("export_attention: no maps recorded for this layer");
  AttentionMapT<S> map;
  map.stage = stage;
  map.layer = layer;
  map.heads = heads;
  return map;
}

inline constexpr char kAttnMagic[8] = {'S', 'A', 'S', 'T', 'A', 'T', 'T', '1'};

// Writes the map as a small binary tensor container (magic, head count, then
// row-major float matrices with shape headers) plus a human-readable sidecar
// at path + ".txt" naming the stage, layer, and utterance.
inline void save_attention_map(const std::string& path, const AttentionMap& map,
                               const std::string& utterance_id) {
  {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open attention map for writing: " + path);
    os.write(kAttnMagic, sizeof kAttnMagic);
    detail::put_u32(os, static_cast<std::uint32_t>(map.heads.size()));
    for (const auto& h : map.heads) detail::put_matf(os, h);
    if (!os) throw IoError("failed writing attention map: " + path);
  }
  std::ofstream txt(path + ".txt", std::ios::trunc);
  if (!txt) throw IoError("cannot open attention sidecar: " + path + ".txt");
  txt << "stage: " << to_string(map.stage) << "\n"
      << "layer: " << map.layer << "\n"
      << "utterance: " << utterance_id << "\n"
      << "heads: " << map.heads.size() << "\n";
  if (!map.heads.empty())
    txt << "shape: " << map.heads.front().rows() << " x "
        << map.heads.front().cols() << "\n";
  if (!txt) throw IoError("failed writing attention sidecar: " + path);
}

struct LoadedAttentionMap {
  AttentionMap map;
  std::string utterance_id;
};

inline LoadedAttentionMap load_attention_map(const std::string& path) {
  LoadedAttentionMap out;
  {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open attention map: " + path);
    char magic[8];
    is.read(magic, sizeof magic);
    if (!is || std::memcmp(magic, kAttnMagic, sizeof magic) != 0)
      throw IoError("not an attention map container: " + path);
    const std::uint32_t n = detail::get_u32(is);
    out.map.heads.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i)
      out.map.heads.push_back(detail::get_matf(is));
    if (!is) throw IoError("truncated attention map: " + path);
  }
  std::ifstream txt(path + ".txt");
  if (!txt) throw IoError("missing attention sidecar: " + path + ".txt");
  std::string line;
  while (std::getline(txt, line)) {
    const auto colon = line.find(": ");
    if (colon == std::string::npos) continue;
    const std::string key = line.substr(0, colon);
    const std::string val = line.substr(colon + 2);
    if (key == "stage") out.map.stage = parse_fusion_stage(val);
    else if (key == "layer") out.map.layer = std::stoi(val);
    else if (key == "utterance") out.utterance_id = val;
  }
  return out;
}

}  // namespace sastnet

#endif  // SASTNET_FUSION_HPP_
