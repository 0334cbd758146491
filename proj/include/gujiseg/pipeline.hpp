#pragma once

// Glue between feature extraction and the CRF: train a segmenter from labeled
// sequences and label raw character sequences with it.

#include <string_view>
#include <vector>

#include "gujiseg/corpus.hpp"
#include "gujiseg/crf.hpp"
#include "gujiseg/features.hpp"
#include "gujiseg/parallel.hpp"

namespace gujiseg {

inline CrfModel train_segmenter(const std::vector<LabeledSequence>& train,
                                const FeatureExtractor& fx, const TrainConfig& cfg) {
  DatasetBuilder builder;
  for (const auto& seq : train) builder.add(fx.extract_all(seq.chars), seq.labels);
  CrfModel model = builder.train(cfg);
  model.config = fx.config();
  return model;
}

inline std::vector<Label> predict_labels(const CrfModel& model, const FeatureExtractor& fx,
                                         std::u32string_view chars) {
  if (chars.empty()) return {};
  return viterbi(model, model.encode(fx.extract_all(chars))).labels;
}

inline std::vector<std::vector<Label>> predict_all(const CrfModel& model,
                                                   const FeatureExtractor& fx,
                                                   const std::vector<LabeledSequence>& seqs) {
  std::vector<std::vector<Label>> out(seqs.size());
  parallel_for(seqs.size(), [&](std::size_t i) { out[i] = predict_labels(model, fx, seqs[i].chars); });
  return out;
}

}  // namespace gujiseg
