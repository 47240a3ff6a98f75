#pragma once

#include <string>
#include <vector>

#include "rg4/data.hpp"

namespace rg4::synth {

constexpr int kNumConditions = 13;

const std::vector<std::string>& condition_names();
// Shared vocabulary covering the grammar, instructions and indications.
const data::Vocab& world_vocab();

// Closed sentence grammar. Every generated sentence instantiates one family;
// the oracles and the rule rewriter parse against the same table, so
// round-trips on grammar output are exact.
enum class Family {
    pos_there_loc,
    pos_there_bare,
    pos_seen,
    pos_moderate,
    pos_noted_loc,
    pos_present,
    unc_possible,
    unc_may,
    unc_reflect,
    neg_no_evidence,
    neg_there_no,
    pc_again,
    pc_stable_cmp,
    pc_improved,
    pc_new,
    pc_resolved,
    pc_standalone,
    pp_status_post,
    pp_prior_ct,
    pp_catheter,
    view_on_lateral,
    view_confirms,
    view_obtained,
    comm_communicated,
    comm_discussed,
    comm_notified,
    clean_lungs,
    clean_heart,
    reco,
    impression_marker,
    impr_none,
    unknown,
};

struct SentenceParse {
    Family family = Family::unknown;
    int cond = -1;  // condition index when the family mentions one
    int loc = -1;   // location index for located templates
};

SentenceParse classify_sentence(const std::vector<int>& tokens);
std::string sentence_text(Family f, int cond = -1, int loc = -1);
data::SentTag family_tag(Family f);
int num_locations();

struct WorldConfig {
    uint64_t seed = 42;
    int num_studies = 200;
    std::string split = "train";
    std::string id_prefix = "s";
    // scenario mix, normalized at generation time
    double mix_sn = 0.4;
    double mix_sw = 0.2;
    double mix_mn = 0.2;
    double mix_mw = 0.2;
    // forbidden-category injection rates (per report)
    double rate_pc = 0.0;
    double rate_pp = 0.0;
    double rate_view = 0.0;
    double rate_comm = 0.0;
    // fraction of PP/comm injections landing in the impression section
    double impression_injection_frac = 0.1;
    // grounded rates for categories the scenario allows
    double natural_pc = 0.7;    // sw/mw
    double natural_view = 0.3;  // mn/mw
    double indication_rate = 0.7;
    double history_rate = 0.4;
    double clean_reco_rate = 0.08;
    int grid = 8;
    int grid_dim = 8;
    double noise_sd = 0.05;

    void validate() const;
};

// Deterministic in the seed; per-study streams are forked from the study id,
// so generation order does not matter and output is canonical by id.
data::Corpus generate_corpus(const WorldConfig& cfg);

struct OracleLabels {
    data::LabelVector labels;
    bool exact = true;  // false when keyword fallback was needed
};

OracleLabels oracle_labels(const data::ReportDoc& doc);
std::vector<data::SentTag> oracle_category_tags(const data::ReportDoc& doc);
data::CategoryFlags oracle_flags(const data::ReportDoc& doc);

// Applies oracle tags/labels in place (used after rewrites).
void annotate(data::ReportDoc& doc);

}  // namespace rg4::synth
