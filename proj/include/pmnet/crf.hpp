#ifndef PMNET_CRF_HPP_
#define PMNET_CRF_HPP_

#include "pmnet/autodiff.hpp"
#include "pmnet/corpus.hpp"

namespace pmnet {

// Linear-chain CRF over the tag inventory. A path y scores
//   start[y_0] + sum_t emissions[t, y_t] + sum_t transitions[y_{t-1}, y_t] + stop[y_{n-1}].

// Negative log-likelihood logZ - score(gold), recorded as one tape node whose
// backward pass uses forward-backward marginals.
Var crf_nll(Var emissions, Var transitions, Var start, Var stop, const TagSequence& gold);

double crf_log_partition(const RowMatrix& emissions, const RowMatrix& transitions, const Vector& start,
                         const Vector& stop);
double crf_path_score(const RowMatrix& emissions, const RowMatrix& transitions, const Vector& start,
                      const Vector& stop, const TagSequence& path);

// Highest-scoring path. Ties prefer the lowest tag id, both for the final tag
// and for each back-pointer.
TagSequence crf_viterbi(const RowMatrix& emissions, const RowMatrix& transitions, const Vector& start,
                        const Vector& stop);

}  // namespace pmnet

#endif  // PMNET_CRF_HPP_
