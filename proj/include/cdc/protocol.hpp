#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cdc/data.hpp"
#include "cdc/models.hpp"
#include "cdc/training.hpp"

namespace cdc {

// Nominal wire size of a cloud->edge decision message.
inline constexpr std::uint64_t kDecisionBytes = 8;

// Stage-1 upload unit: packed latent blobs, labels, and the decoder.
struct LatentPayload {
  std::vector<std::vector<std::uint8_t>> blobs;  // packed bits, one per sample
  std::vector<int> latent_shape;
  std::vector<std::uint16_t> labels;
  std::vector<std::uint8_t> decoder_bytes;  // ParamStore wire format
  int m = 4;
  int round = 0;

  std::uint64_t latent_byte_count() const {
    std::uint64_t n = 0;
    for (const auto& b : blobs) n += b.size();
    return n;
  }
  std::uint64_t label_byte_count() const { return 2 * static_cast<std::uint64_t>(labels.size()); }
  std::uint64_t total_bytes() const {
    return latent_byte_count() + label_byte_count() + decoder_bytes.size();
  }
};

// Itemized per-round byte accounting against a cumulative budget.
struct BandwidthLedger {
  struct Entry {
    int round = 0;
    std::uint64_t latent_bytes = 0;
    std::uint64_t label_bytes = 0;
    std::uint64_t decoder_bytes = 0;
    std::uint64_t decision_bytes = 0;
    std::uint64_t raw_equivalent_bytes = 0;
  };

  std::vector<Entry> entries;
  std::uint64_t budget_bytes = 0;

  std::uint64_t spent() const {
    std::uint64_t n = 0;
    for (const auto& e : entries) {
      n += e.latent_bytes + e.label_bytes + e.decoder_bytes + e.decision_bytes;
    }
    return n;
  }
  std::uint64_t raw_total() const {
    std::uint64_t n = 0;
    for (const auto& e : entries) n += e.raw_equivalent_bytes;
    return n;
  }
  std::uint64_t remaining() const { return budget_bytes > spent() ? budget_bytes - spent() : 0; }

  // Always recomputed: 1 - payload/raw. Overhead-inclusive counts every
  // uploaded byte; overhead-free counts latent bits only.
  double reduction_vs_raw() const {
    return 1.0 - static_cast<double>(spent()) / static_cast<double>(raw_total());
  }
  double reduction_vs_raw_overhead_free() const {
    std::uint64_t latent = 0;
    for (const auto& e : entries) latent += e.latent_bytes;
    return 1.0 - static_cast<double>(latent) / static_cast<double>(raw_total());
  }
};

struct RatioRequest {
  bool terminated = true;
  int next_m = -1;  // meaningful only when !terminated
};

struct TranscriptMessage {
  int round = 0;
  std::string direction;  // "edge_to_cloud" | "cloud_to_edge"
  std::string type;       // "payload" | "decision"
  std::uint64_t bytes = 0;
};

struct RoundMetrics {
  int round = 0;
  int m = 4;
  double ac_accuracy = 0;
  std::uint64_t decoder_hash = 0;  // FNV-1a of the shipped decoder bytes
};

struct CollaborationTranscript {
  std::vector<TranscriptMessage> messages;
  std::vector<RoundMetrics> rounds;
  BandwidthLedger ledger;
  std::string final_status;  // "terminated" | "failed: <reason>"

  std::string to_jsonl() const;
};

// Full experiment description for the two-actor simulation.
struct CollabConfig {
  LabeledDataset train;
  LabeledDataset test;
  CodecConfig codec;
  ClassifierConfig ec_cfg;
  ClassifierConfig ac_cfg;
  TrainPlan plan;
  int initial_m = 4;
  std::uint64_t budget_bytes = 0;
  int raw_bits_per_pixel = 16;
  long finetune_steps = 50;
  int eval_subset = 32;
};

std::uint64_t fnv1a(const std::vector<std::uint8_t>& bytes);

// samples * H * W * rawBitsPerPixel / 8.
std::uint64_t raw_equivalent_bytes(std::size_t samples, int height, int width,
                                   int raw_bits_per_pixel = 16);

// Deterministic (eps = 0) encoding of every training sample plus the
// serialized decoder. Errors if the edge model failed to converge.
LatentPayload edge_stage1(const std::vector<Tensor<float>>& images, const std::vector<int>& labels,
                          Autoencoder<float>& ae, bool edge_converged, int round);

// Default renegotiation policy: step the mask down by one when the projected
// next-round bytes fit the remaining budget, otherwise terminate.
RatioRequest default_ratio_policy(const BandwidthLedger& ledger, int current_m,
                                  std::uint64_t projected_next_round_bytes);

using RatioPolicy = RatioRequest (*)(const BandwidthLedger&, int, std::uint64_t);

struct Stage2Result {
  double accuracy = 0;
  RatioRequest request;
};

// Cloud side of one round: restore, train AC, account bytes, decide.
Stage2Result cloud_stage2(const LatentPayload& payload, const CodecConfig& codec, Network<float>& ac,
                          const TrainPlan& plan, BandwidthLedger& ledger,
                          const std::vector<Tensor<float>>& test_images,
                          const std::vector<int>& test_labels,
                          std::uint64_t raw_equiv_bytes_this_round,
                          RatioPolicy policy = default_ratio_policy);

// Runs Stage 1 -> Stage 2 -> fine-tune loop until termination.
CollaborationTranscript run_collaboration(const CollabConfig& config,
                                          RatioPolicy policy = default_ratio_policy);

}  // namespace cdc
