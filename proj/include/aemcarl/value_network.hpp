#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "aemcarl/aem.hpp"
#include "aemcarl/attention.hpp"
#include "aemcarl/graph.hpp"

namespace aemcarl {

struct ModelConfig {
  aem::AemConfig aem;
  attention::TfConfig tf;
  std::vector<Eigen::Index> head_hidden{150, 100, 100};
  Eigen::Index agent_fields = 7;
  std::uint64_t seed = 0;

  void validate() const;
};

// Stacked joint states: rows of every sample concatenated, with row ranges.
struct StateBatch {
  Tensor rows;
  nn::Segments segments;

  void add(const Tensor& joint_state);
  Eigen::Index size() const { return segments.count(); }
  static StateBatch of(std::span<const Tensor> states);
};

// AEM -> transformer encoder -> value head on [row 0 of encoder output, agent fields].
class ValueNetwork {
 public:
  struct Forward {
    nn::Var values;  // count x 1
    aem::AemOutput aem;
    std::vector<nn::Var> attention;  // one node per head
  };

  ValueNetwork() = default;
  explicit ValueNetwork(const ModelConfig& config);

  ValueNetwork(const ValueNetwork& other);
  ValueNetwork& operator=(const ValueNetwork& other);

  const ModelConfig& config() const { return config_; }

  Forward forward(nn::Graph& g, const StateBatch& batch, const Tensor* h_init = nullptr,
                  int fixed_n = -1);

  // Evaluation without gradients.
  double value(const Tensor& joint_state);
  std::vector<double> values(const StateBatch& batch, int fixed_n = -1);

  std::vector<nn::Parameter*> parameters();
  void copy_weights_from(ValueNetwork& other);
  std::size_t parameter_count();

  aem::Aem& aem() { return aem_; }
  attention::TfEncoder& encoder() { return encoder_; }
  attention::ValueHead& head() { return head_; }

 private:
  ModelConfig config_;
  aem::Aem aem_;
  attention::TfEncoder encoder_;
  attention::ValueHead head_;
};

}  // namespace aemcarl
