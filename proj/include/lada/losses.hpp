#pragma once

#include <span>
#include <string>
#include <vector>

#include "lada/action_space.hpp"
#include "lada/affinity.hpp"
#include "lada/numerics.hpp"

namespace lada {

struct ContrastiveConfig {
  double tau = 0.07;
  double lambda = 1.0;  // weight of the action-primitive branch

  void validate() const;
};

// A scalar loss and its gradient with respect to each input, in argument order.
struct LossValue {
  double value = 0.0;
  std::vector<Mat> grads;
};

// -(1/N) sum_ij T_ij log softmax_j(cos(anchor_i, cand_j) / tau).
// grads = {dAnchors, dCandidates}.
LossValue soft_infonce(const Mat& anchors, const Mat& candidates, const Mat& target, double tau);

// Hard-label InfoNCE: anchor i's only positive is candidate i. grads as soft_infonce.
LossValue standard_infonce(const Mat& anchors, const Mat& candidates, double tau);

// Action-action branch: anchors and candidates are both A. grads = {dA}.
LossValue loss_action_action(const Mat& a, const Mat& target_aa, double tau);

// Action-primitive branch against K distinct descriptions. grads = {dA, dP}.
LossValue loss_action_primitive(const Mat& a, const Mat& p, const Mat& target_ap, double tau);

// Distinct descriptions of a batch, in order of first appearance.
struct DescriptionSet {
  std::vector<std::string> texts;         // K distinct sentences
  std::vector<std::size_t> owner;         // sample -> index into texts
  std::vector<std::size_t> representative;  // text -> first sample carrying it
};

DescriptionSet dedupe_descriptions(std::span<const std::string> descriptions);

// N x K target for the action-primitive branch: entry (i, c) is the affinity
// between sample i and the samples described by c, rows normalized to 1.
Mat primitive_target(const AffinityMatrix& s, const DescriptionSet& d);

double contrastive_total(double l_a, double l_m, double lambda);

// Combines the two branches: grads = {dA, dP}.
LossValue contrastive_total(const LossValue& l_a, const LossValue& l_m, double lambda);

// Mean over the batch of the summed translation / rotation / gripper
// cross-entropies. grads = {dLogitsT, dLogitsR, dLogitsG}.
LossValue imitation_loss(const Mat& logits_t, const Mat& logits_r, const Mat& logits_g,
                         std::span<const ClassIndices> labels);

// Mean absolute error over every entry; subgradient 0 at ties. grads = {dPred}.
LossValue l1_trajectory_loss(const Mat& pred, const Mat& target);

}  // namespace lada
