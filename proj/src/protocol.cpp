#include "cdc/protocol.hpp"

#include <json.hpp>

#include "cdc/param_store.hpp"

namespace cdc {

std::uint64_t fnv1a(const std::vector<std::uint8_t>& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t raw_equivalent_bytes(std::size_t samples, int height, int width,
                                   int raw_bits_per_pixel) {
  return static_cast<std::uint64_t>(samples) * height * width * raw_bits_per_pixel / 8;
}

LatentPayload edge_stage1(const std::vector<Tensor<float>>& images, const std::vector<int>& labels,
                          Autoencoder<float>& ae, bool edge_converged, int round) {
  if (images.empty()) throw StateError("edge_stage1: nothing to upload");
  if (!edge_converged) throw StateError("edge_stage1: edge model did not converge");
  LatentPayload payload;
  payload.m = ae.qcfg.m;
  payload.round = round;
  for (std::size_t i = 0; i < images.size(); ++i) {
    LatentCode code = ae.encode(images[i]);
    if (payload.latent_shape.empty()) payload.latent_shape = code.shape;
    payload.blobs.push_back(pack(code));
    payload.labels.push_back(static_cast<std::uint16_t>(labels[i]));
  }
  payload.decoder_bytes = serialize_network(ae.decoder);
  return payload;
}

RatioRequest default_ratio_policy(const BandwidthLedger& ledger, int current_m,
                                  std::uint64_t projected_next_round_bytes) {
  if (current_m > 0 && ledger.remaining() >= projected_next_round_bytes) {
    return RatioRequest{false, current_m - 1};
  }
  return RatioRequest{true, -1};
}

Stage2Result cloud_stage2(const LatentPayload& payload, const CodecConfig& codec, Network<float>& ac,
                          const TrainPlan& plan, BandwidthLedger& ledger,
                          const std::vector<Tensor<float>>& test_images,
                          const std::vector<int>& test_labels,
                          std::uint64_t raw_equiv_bytes_this_round, RatioPolicy policy) {
  Rng dummy(0);
  Network<float> decoder = build_decoder<float>(codec, dummy);
  load_network(decoder, payload.decoder_bytes);

  std::vector<LatentCode> codes;
  std::vector<int> labels;
  codes.reserve(payload.blobs.size());
  for (std::size_t i = 0; i < payload.blobs.size(); ++i) {
    codes.push_back(unpack(payload.blobs[i], payload.m, payload.latent_shape));
    labels.push_back(payload.labels[i]);
  }
  CloudTrainResult trained =
      train_cloud_ac(codes, labels, decoder, ac, plan, test_images, test_labels);

  BandwidthLedger::Entry entry;
  entry.round = payload.round;
  entry.latent_bytes = payload.latent_byte_count();
  entry.label_bytes = payload.label_byte_count();
  entry.decoder_bytes = payload.decoder_bytes.size();
  entry.decision_bytes = kDecisionBytes;
  entry.raw_equivalent_bytes = raw_equiv_bytes_this_round;
  ledger.entries.push_back(entry);

  // Projection assumes the same sample count and decoder size at m - 1.
  std::uint64_t projected = 0;
  if (payload.m > 0) {
    std::size_t symbols = Tensor<float>::numel_of(payload.latent_shape);
    projected = payload.blobs.size() * payload_bytes(symbols, payload.m - 1) +
                payload.label_byte_count() + payload.decoder_bytes.size() + kDecisionBytes;
  }
  Stage2Result result;
  result.accuracy = trained.test_accuracy;
  result.request = policy(ledger, payload.m, projected);
  return result;
}

namespace {

nlohmann::json message_json(const TranscriptMessage& msg) {
  return {{"kind", "message"},
          {"round", msg.round},
          {"direction", msg.direction},
          {"type", msg.type},
          {"bytes", msg.bytes}};
}

}  // namespace

std::string CollaborationTranscript::to_jsonl() const {
  std::string out;
  std::size_t mi = 0;
  for (const auto& round : rounds) {
    // payload message, round metrics, decision message, in protocol order
    while (mi < messages.size() && messages[mi].round == round.round) {
      out += message_json(messages[mi]).dump();
      out += "\n";
      if (messages[mi].type == "payload") {
        nlohmann::json j = {{"kind", "round"},
                            {"round", round.round},
                            {"m", round.m},
                            {"ac_accuracy", round.ac_accuracy},
                            {"decoder_hash", round.decoder_hash}};
        out += j.dump();
        out += "\n";
      }
      ++mi;
    }
  }
  for (; mi < messages.size(); ++mi) {
    out += message_json(messages[mi]).dump();
    out += "\n";
  }
  nlohmann::json summary = {{"kind", "summary"},
                            {"status", final_status},
                            {"total_bytes", ledger.spent()},
                            {"raw_bytes", ledger.raw_total()},
                            {"budget_bytes", ledger.budget_bytes},
                            {"reduction_vs_raw", ledger.reduction_vs_raw()},
                            {"reduction_overhead_free", ledger.reduction_vs_raw_overhead_free()}};
  out += summary.dump();
  out += "\n";
  return out;
}

CollaborationTranscript run_collaboration(const CollabConfig& config, RatioPolicy policy) {
  CollaborationTranscript transcript;
  transcript.ledger.budget_bytes = config.budget_bytes;

  std::vector<Tensor<float>> test_images = config.test.images;
  const std::vector<int>& test_labels = config.test.labels;
  std::uint64_t raw_bytes = raw_equivalent_bytes(config.train.size(), config.codec.height,
                                                 config.codec.width, config.raw_bits_per_pixel);

  try {
    Rng init(config.plan.seed);
    Autoencoder<float> ae(config.codec, config.initial_m, init, config.plan.seed ^ 0xabcdef12345ull);
    Network<float> ec = build_ec<float>(config.ec_cfg, init);
    EdgeTrainResult edge = train_edge(config.train.images, config.train.labels, ae, ec, config.plan);

    std::vector<Tensor<float>> eval_subset(
        config.train.images.begin(),
        config.train.images.begin() +
            std::min<std::size_t>(config.train.size(), config.eval_subset));

    int m = config.initial_m;
    int round = 0;
    while (true) {
      LatentPayload payload =
          edge_stage1(config.train.images, config.train.labels, ae, edge.converged, round);
      transcript.messages.push_back(
          {round, "edge_to_cloud", "payload", payload.total_bytes()});

      Rng ac_init(config.plan.seed + 1000003ull * static_cast<std::uint64_t>(round));
      Network<float> ac = build_ac<float>(config.ac_cfg, ac_init);
      Stage2Result stage2 = cloud_stage2(payload, config.codec, ac, config.plan,
                                         transcript.ledger, test_images, test_labels, raw_bytes,
                                         policy);
      transcript.rounds.push_back(
          {round, m, stage2.accuracy, fnv1a(payload.decoder_bytes)});
      transcript.messages.push_back({round, "cloud_to_edge", "decision", kDecisionBytes});

      if (stage2.request.terminated) {
        transcript.final_status = "terminated";
        break;
      }
      finetune_on_mask_switch(ae, ec, stage2.request.next_m, config.plan, config.train.images,
                              config.train.labels, eval_subset, config.finetune_steps);
      m = stage2.request.next_m;
      ++round;
    }
  } catch (const std::exception& e) {
    transcript.final_status = std::string("failed: ") + e.what();
  }
  return transcript;
}

}  // namespace cdc
