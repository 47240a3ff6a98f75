#include "rg4/world.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include "rg4/rng.hpp"

namespace rg4::synth {

using namespace rg4::data;
using core::Rng;

const std::vector<std::string>& condition_names() {
    static const std::vector<std::string> names = {
        "opacity",      "effusion", "edema",   "consolidation", "pneumothorax",
        "cardiomegaly", "atelectasis", "fracture", "nodule",    "emphysema",
        "fibrosis",     "scoliosis", "hernia"};
    return names;
}

namespace {

const std::vector<std::string>& location_phrases() {
    static const std::vector<std::string> locs = {"left lung", "right lung", "upper zone",
                                                  "lower zone"};
    return locs;
}

const std::vector<std::string>& symptom_words() {
    static const std::vector<std::string> syms = {"cough", "fever", "pain", "dyspnea", "fatigue"};
    return syms;
}

struct TemplateDef {
    Family family;
    const char* text;  // {c} condition, {loc} location phrase
    SentTag tag;
};

const std::vector<TemplateDef>& templates() {
    static const std::vector<TemplateDef> defs = {
        {Family::pos_there_loc, "there is {c} in the {loc} .", SentTag::none},
        {Family::pos_there_bare, "there is {c} .", SentTag::none},
        {Family::pos_seen, "{c} is seen .", SentTag::none},
        {Family::pos_moderate, "moderate {c} is present .", SentTag::none},
        {Family::pos_noted_loc, "{c} is noted in the {loc} .", SentTag::none},
        {Family::pos_present, "{c} is present .", SentTag::none},
        {Family::unc_possible, "possible {c} is seen .", SentTag::none},
        {Family::unc_may, "{c} may be present .", SentTag::none},
        {Family::unc_reflect, "findings possibly reflect {c} .", SentTag::none},
        {Family::neg_no_evidence, "no evidence of {c} .", SentTag::none},
        {Family::neg_there_no, "there is no {c} .", SentTag::none},
        {Family::pc_again, "{c} is again seen .", SentTag::pc},
        {Family::pc_stable_cmp, "{c} is stable compared to prior exam .", SentTag::pc},
        {Family::pc_improved, "{c} has improved since the previous exam .", SentTag::pc},
        {Family::pc_new, "there is a new {c} .", SentTag::pc},
        {Family::pc_resolved, "previously seen {c} has resolved .", SentTag::pc},
        {Family::pc_standalone, "stable appearance compared to prior exam .", SentTag::pc},
        {Family::pp_status_post, "the patient is status post cardiac surgery .", SentTag::pp},
        {Family::pp_prior_ct, "prior ct examination showed {c} .", SentTag::pp},
        {Family::pp_catheter, "the drainage catheter has been removed .", SentTag::pp},
        {Family::view_on_lateral, "on the lateral view there is {c} .", SentTag::view},
        {Family::view_confirms, "the lateral view confirms {c} .", SentTag::view},
        {Family::view_obtained, "frontal and lateral views were obtained .", SentTag::view},
        {Family::comm_communicated, "these findings were communicated to dr smith .", SentTag::comm},
        {Family::comm_discussed, "results were discussed with the care team .", SentTag::comm},
        {Family::comm_notified, "the referring physician was notified by telephone .", SentTag::comm},
        {Family::clean_lungs, "the remaining lungs are clear .", SentTag::none},
        {Family::clean_heart, "the cardiac silhouette is normal .", SentTag::none},
        {Family::reco, "the lateral view is recommended to assist in diagnosis .", SentTag::none},
        {Family::impression_marker, "impression .", SentTag::none},
        {Family::impr_none, "no acute findings .", SentTag::none},
    };
    return defs;
}

std::vector<std::string> split_words(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream is(text);
    std::string w;
    while (is >> w) out.push_back(w);
    return out;
}

std::vector<std::string> vocab_words() {
    std::vector<std::string> words;
    auto push = [&](const std::string& w) { words.push_back(w); };
    for (const auto& c : condition_names()) push(c);
    for (const auto& t : templates())
        for (const auto& w : split_words(t.text))
            if (w != "{c}" && w != "{loc}") push(w);
    for (const auto& l : location_phrases())
        for (const auto& w : split_words(l)) push(w);
    for (const auto& s : symptom_words()) push(s);
    for (const std::string& w :
         {"indication", ":", "history", "chronic", "chest",
          "generate", "the", "report", "for", "scenario", "sn", "sw", "mn", "mw", "using"})
        push(w);
    return words;
}

}  // namespace

const data::Vocab& world_vocab() {
    static const data::Vocab vocab(vocab_words());
    return vocab;
}

int num_locations() { return static_cast<int>(location_phrases().size()); }

data::SentTag family_tag(Family f) {
    for (const auto& t : templates())
        if (t.family == f) return t.tag;
    return SentTag::none;
}

std::string sentence_text(Family f, int cond, int loc) {
    for (const auto& t : templates()) {
        if (t.family != f) continue;
        std::string out;
        for (const auto& w : split_words(t.text)) {
            std::string piece = w;
            if (w == "{c}") {
                if (cond < 0) throw std::invalid_argument("sentence_text: family needs a condition");
                piece = condition_names()[static_cast<size_t>(cond)];
            } else if (w == "{loc}") {
                piece = location_phrases()[static_cast<size_t>(loc < 0 ? 0 : loc)];
            }
            if (!out.empty()) out += ' ';
            out += piece;
        }
        return out;
    }
    throw std::invalid_argument("sentence_text: no template for family");
}

SentenceParse classify_sentence(const std::vector<int>& tokens) {
    const auto& vocab = world_vocab();
    // condition ids resolved once
    static const std::vector<int> cond_ids = [] {
        std::vector<int> ids;
        for (const auto& c : condition_names()) ids.push_back(world_vocab().id(c));
        return ids;
    }();
    auto cond_index = [&](int tok) {
        for (size_t i = 0; i < cond_ids.size(); ++i)
            if (cond_ids[i] == tok) return static_cast<int>(i);
        return -1;
    };
    for (const auto& t : templates()) {
        const auto words = split_words(t.text);
        // expand {loc} over candidates; {c} over conditions
        size_t ti = 0;
        SentenceParse parse;
        parse.family = t.family;
        bool ok = true;
        for (size_t wi = 0; wi < words.size() && ok; ++wi) {
            const auto& w = words[wi];
            if (w == "{c}") {
                if (ti >= tokens.size()) { ok = false; break; }
                const int ci = cond_index(tokens[ti]);
                if (ci < 0) { ok = false; break; }
                parse.cond = ci;
                ++ti;
            } else if (w == "{loc}") {
                if (ti + 1 >= tokens.size()) { ok = false; break; }
                bool matched = false;
                for (size_t li = 0; li < location_phrases().size(); ++li) {
                    const auto lw = split_words(location_phrases()[li]);
                    if (tokens[ti] == vocab.id(lw[0]) && tokens[ti + 1] == vocab.id(lw[1])) {
                        parse.loc = static_cast<int>(li);
                        matched = true;
                        break;
                    }
                }
                if (!matched) { ok = false; break; }
                ti += 2;
            } else {
                if (ti >= tokens.size() || tokens[ti] != vocab.id(w)) { ok = false; break; }
                ++ti;
            }
        }
        if (ok && ti == tokens.size()) return parse;
    }
    return {};
}

namespace {

// Keyword fallback for sentences outside the grammar (model output drift).
SentTag fallback_tag(const std::vector<int>& tokens) {
    const auto& vocab = world_vocab();
    auto has = [&](const char* w) {
        const int id = vocab.id(w);
        return std::find(tokens.begin(), tokens.end(), id) != tokens.end();
    };
    if (has("communicated") || has("discussed") || has("notified")) return SentTag::comm;
    if (has("status") || has("ct") || has("catheter")) return SentTag::pp;
    if ((has("lateral") || has("views")) && !has("recommended")) return SentTag::view;
    if (has("again") || has("stable") || has("compared") || has("improved") || has("new") ||
        has("previously") || has("resolved") || has("prior") || has("previous"))
        return SentTag::pc;
    return SentTag::none;
}

// positive > uncertain > negated > not mentioned
void merge_label(int& slot, int v) {
    auto rank = [](int x) {
        switch (x) {
            case 1: return 3;
            case -1: return 2;
            case 0: return 1;
            default: return 0;
        }
    };
    if (rank(v) > rank(slot)) slot = v;
}

void apply_family_label(LabelVector& labels, const SentenceParse& p) {
    if (p.cond < 0) return;
    int v = 2;
    switch (p.family) {
        case Family::pos_there_loc:
        case Family::pos_there_bare:
        case Family::pos_seen:
        case Family::pos_moderate:
        case Family::pos_noted_loc:
        case Family::pos_present:
        case Family::pc_again:
        case Family::pc_stable_cmp:
        case Family::pc_improved:
        case Family::pc_new:
        case Family::pp_prior_ct:
        case Family::view_on_lateral:
        case Family::view_confirms:
            v = 1;
            break;
        case Family::unc_possible:
        case Family::unc_may:
        case Family::unc_reflect:
            v = -1;
            break;
        case Family::neg_no_evidence:
        case Family::neg_there_no:
        case Family::pc_resolved:
            v = 0;
            break;
        default:
            return;
    }
    merge_label(labels[static_cast<size_t>(p.cond)], v);
}

void fallback_label(LabelVector& labels, const std::vector<int>& tokens) {
    const auto& vocab = world_vocab();
    auto has = [&](const char* w) {
        const int id = vocab.id(w);
        return std::find(tokens.begin(), tokens.end(), id) != tokens.end();
    };
    int v = 1;
    if (has("no") || has("resolved")) v = 0;
    if (has("possible") || has("possibly") || has("may")) v = -1;
    for (int c = 0; c < kNumConditions; ++c) {
        const int id = vocab.id(condition_names()[static_cast<size_t>(c)]);
        if (std::find(tokens.begin(), tokens.end(), id) != tokens.end())
            merge_label(labels[static_cast<size_t>(c)], v);
    }
}

}  // namespace

OracleLabels oracle_labels(const ReportDoc& doc) {
    OracleLabels out;
    out.labels = not_mentioned_labels();
    for (size_t i = 0; i < doc.sentences.size(); ++i) {
        const auto toks = doc.sentence_tokens(i);
        const auto parse = classify_sentence(toks);
        if (parse.family == Family::unknown) {
            out.exact = false;
            fallback_label(out.labels, toks);
        } else {
            apply_family_label(out.labels, parse);
        }
    }
    bool any_finding = false;
    for (int c = 0; c < kNumConditions; ++c)
        if (out.labels[static_cast<size_t>(c)] == 1 || out.labels[static_cast<size_t>(c)] == -1)
            any_finding = true;
    out.labels[13] = any_finding ? 2 : 1;  // no-finding slot
    return out;
}

std::vector<SentTag> oracle_category_tags(const ReportDoc& doc) {
    std::vector<SentTag> tags;
    tags.reserve(doc.sentences.size());
    for (size_t i = 0; i < doc.sentences.size(); ++i) {
        const auto toks = doc.sentence_tokens(i);
        const auto parse = classify_sentence(toks);
        tags.push_back(parse.family == Family::unknown ? fallback_tag(toks) : family_tag(parse.family));
    }
    return tags;
}

CategoryFlags oracle_flags(const ReportDoc& doc) {
    CategoryFlags f;
    for (const auto t : oracle_category_tags(doc)) {
        f.pc = f.pc || t == SentTag::pc;
        f.pp = f.pp || t == SentTag::pp;
        f.view = f.view || t == SentTag::view;
        f.comm = f.comm || t == SentTag::comm;
    }
    return f;
}

void annotate(ReportDoc& doc) {
    const auto tags = oracle_category_tags(doc);
    for (size_t i = 0; i < doc.sentences.size(); ++i) doc.sentences[i].tag = tags[i];
    doc.labels = oracle_labels(doc).labels;
}

void WorldConfig::validate() const {
    const double mix = mix_sn + mix_sw + mix_mn + mix_mw;
    if (mix <= 0.0) throw std::invalid_argument("world: scenario mix must be positive");
    for (double r : {rate_pc, rate_pp, rate_view, rate_comm, natural_pc, natural_view,
                     indication_rate, history_rate, clean_reco_rate, impression_injection_frac})
        if (r < 0.0 || r > 1.0) throw std::invalid_argument("world: rates must lie in [0,1]");
    if (num_studies < 0) throw std::invalid_argument("world: num_studies must be >= 0");
}

namespace {

// Conditions 0..5 are the common chronic-prone set: they carry higher
// prevalence, and dirty prior-comparison phrasing attaches to them so that
// the phrasing is conditionally dominant given the visible finding.
constexpr int kCommonConditions = 6;

std::vector<double> condition_weights() {
    std::vector<double> w(kNumConditions, 1.0);
    for (int i = 0; i < kCommonConditions; ++i) w[static_cast<size_t>(i)] = 3.0;
    return w;
}

StatusVector sample_status(Rng& rng) {
    StatusVector st{};
    st.fill(CondStatus::absent);
    auto weights = condition_weights();
    const int kp = 1 + rng.uniform_int(3);
    for (int k = 0; k < kp; ++k) {
        const int c = rng.pick_weighted(weights);
        weights[static_cast<size_t>(c)] = 0.0;
        st[static_cast<size_t>(c)] = CondStatus::positive;
    }
    const int ku = rng.uniform_int(3);
    for (int k = 0; k < ku; ++k) {
        std::vector<int> free;
        for (int c = 0; c < kNumConditions; ++c)
            if (st[static_cast<size_t>(c)] == CondStatus::absent) free.push_back(c);
        if (free.empty()) break;
        st[static_cast<size_t>(free[static_cast<size_t>(rng.uniform_int(static_cast<int>(free.size())))])] =
            CondStatus::uncertain;
    }
    // negative mentions: the two highest-priority absent conditions, so the
    // choice is derivable from the visible finding set
    int mentioned = 0;
    for (int c = 0; c < kNumConditions && mentioned < 2; ++c)
        if (st[static_cast<size_t>(c)] == CondStatus::absent) {
            st[static_cast<size_t>(c)] = CondStatus::negated;
            ++mentioned;
        }
    return st;
}

enum class Transition { none, stable, improved, resolved, appeared };

struct TransitionRecord {
    std::array<Transition, 13> t{};
};

StatusVector transition_status(const StatusVector& prior, Rng& rng, TransitionRecord& rec) {
    StatusVector cur{};
    cur.fill(CondStatus::absent);
    rec.t.fill(Transition::none);
    for (int c = 0; c < kNumConditions; ++c) {
        const auto p = prior[static_cast<size_t>(c)];
        if (p == CondStatus::positive) {
            const double r = rng.uniform();
            if (r < 0.5) {
                cur[static_cast<size_t>(c)] = CondStatus::positive;
                rec.t[static_cast<size_t>(c)] = Transition::stable;
            } else if (r < 0.7) {
                cur[static_cast<size_t>(c)] = CondStatus::positive;
                rec.t[static_cast<size_t>(c)] = Transition::improved;
            } else {
                rec.t[static_cast<size_t>(c)] = Transition::resolved;
            }
        } else if (p == CondStatus::uncertain) {
            const double r = rng.uniform();
            if (r < 0.3) {
                cur[static_cast<size_t>(c)] = CondStatus::positive;
                rec.t[static_cast<size_t>(c)] = Transition::appeared;
            } else if (r < 0.7) {
                cur[static_cast<size_t>(c)] = CondStatus::uncertain;
            }
        }
    }
    // fresh findings
    const int n_new = rng.uniform_int(2);
    auto weights = condition_weights();
    for (int c = 0; c < kNumConditions; ++c)
        if (cur[static_cast<size_t>(c)] != CondStatus::absent || prior[static_cast<size_t>(c)] != CondStatus::absent)
            weights[static_cast<size_t>(c)] = 0.0;
    for (int k = 0; k < n_new; ++k) {
        bool any = false;
        for (double w : weights) any = any || w > 0.0;
        if (!any) break;
        const int c = rng.pick_weighted(weights);
        weights[static_cast<size_t>(c)] = 0.0;
        cur[static_cast<size_t>(c)] = CondStatus::positive;
        rec.t[static_cast<size_t>(c)] = Transition::appeared;
    }
    // guarantee at least one positive
    bool any_pos = false;
    for (const auto s : cur) any_pos = any_pos || s == CondStatus::positive;
    if (!any_pos) {
        auto w2 = condition_weights();
        const int c = rng.pick_weighted(w2);
        cur[static_cast<size_t>(c)] = CondStatus::positive;
        rec.t[static_cast<size_t>(c)] = Transition::appeared;
    }
    // negative mentions as in sample_status
    int mentioned = 0;
    for (int c = 0; c < kNumConditions && mentioned < 2; ++c)
        if (cur[static_cast<size_t>(c)] == CondStatus::absent) {
            cur[static_cast<size_t>(c)] = CondStatus::negated;
            ++mentioned;
        }
    return cur;
}

ImageGrid render_grid(const StatusVector& st, bool lateral, int grid, int dim, double noise_sd,
                      Rng& noise_rng, uint64_t world_seed) {
    ImageGrid g;
    g.cells = grid * grid;
    g.dim = dim;
    g.values.assign(static_cast<size_t>(g.cells) * dim, 0.0);
    for (int c = 0; c < kNumConditions; ++c) {
        const auto s = st[static_cast<size_t>(c)];
        if (s != CondStatus::positive && s != CondStatus::uncertain) continue;
        const double amp = s == CondStatus::positive ? 1.0 : 0.45;
        Rng sig_rng = Rng(world_seed).fork("cond-signature-" + std::to_string(c));
        std::vector<double> sig(static_cast<size_t>(dim));
        double norm = 0.0;
        for (auto& v : sig) {
            v = sig_rng.normal();
            norm += v * v;
        }
        norm = std::sqrt(norm);
        for (auto& v : sig) v /= norm;
        const int cr = lateral ? (c * 5 + 2) % grid : (c * 3) % grid;
        const int cc = lateral ? (c * 3 + 4) % grid : (c * 5) % grid;
        const double sigma = 1.6;
        for (int r = 0; r < grid; ++r)
            for (int q = 0; q < grid; ++q) {
                const double d2 = (r - cr) * (r - cr) + (q - cc) * (q - cc);
                const double w = amp * std::exp(-d2 / (2.0 * sigma * sigma));
                if (w < 1e-4) continue;
                for (int k = 0; k < dim; ++k)
                    g.values[(static_cast<size_t>(r) * grid + q) * dim + k] += w * sig[static_cast<size_t>(k)];
            }
    }
    for (auto& v : g.values) v += noise_rng.normal(0.0, noise_sd);
    return g;
}

struct SentencePlan {
    std::string text;
    bool impression = false;
};

std::string plain_positive(int c, Rng& rng) {
    const double r = rng.uniform();
    if (r < 0.3) return sentence_text(Family::pos_there_loc, c, c % num_locations());
    if (r < 0.5) return sentence_text(Family::pos_seen, c);
    if (r < 0.65) return sentence_text(Family::pos_moderate, c);
    if (r < 0.85) return sentence_text(Family::pos_noted_loc, c, (c + 1) % num_locations());
    return sentence_text(Family::pos_there_bare, c);
}

std::string plain_uncertain(int c, Rng& rng) {
    const double r = rng.uniform();
    if (r < 0.4) return sentence_text(Family::unc_possible, c);
    if (r < 0.8) return sentence_text(Family::unc_may, c);
    return sentence_text(Family::unc_reflect, c);
}

double estimate_pc_eligibility(uint64_t seed) {
    Rng rng = Rng(seed).fork("pc-eligibility-calibration");
    const int trials = 2000;
    int hits = 0;
    for (int t = 0; t < trials; ++t) {
        const auto st = sample_status(rng);
        for (int c = 0; c < kCommonConditions; ++c)
            if (st[static_cast<size_t>(c)] == CondStatus::positive) {
                ++hits;
                break;
            }
    }
    return static_cast<double>(hits) / trials;
}

std::string render_report_text(const std::vector<SentencePlan>& findings,
                               const std::vector<SentencePlan>& impression) {
    std::string out;
    auto append = [&](const std::string& s) {
        if (!out.empty()) out += ' ';
        out += s;
    };
    for (const auto& s : findings) append(s.text);
    append(sentence_text(Family::impression_marker));
    for (const auto& s : impression) append(s.text);
    return out;
}

std::string clean_report_for_status(const StatusVector& st, Rng& rng) {
    std::vector<SentencePlan> findings, impression;
    for (int c = 0; c < kNumConditions; ++c) {
        const auto s = st[static_cast<size_t>(c)];
        if (s == CondStatus::positive) findings.push_back({plain_positive(c, rng)});
        else if (s == CondStatus::uncertain) findings.push_back({plain_uncertain(c, rng)});
        else if (s == CondStatus::negated)
            findings.push_back({sentence_text(rng.bernoulli(0.5) ? Family::neg_no_evidence
                                                                 : Family::neg_there_no, c)});
    }
    bool any = false;
    for (int c = 0; c < kNumConditions; ++c) {
        const auto s = st[static_cast<size_t>(c)];
        if (s == CondStatus::positive) {
            impression.push_back({sentence_text(Family::pos_present, c)});
            any = true;
        } else if (s == CondStatus::uncertain) {
            impression.push_back({sentence_text(Family::unc_may, c)});
            any = true;
        }
    }
    if (!any) impression.push_back({sentence_text(Family::impr_none)});
    return render_report_text(findings, impression);
}

}  // namespace

Corpus generate_corpus(const WorldConfig& cfg) {
    cfg.validate();
    const auto& vocab = world_vocab();
    Corpus corpus;
    const double p_eligible = estimate_pc_eligibility(cfg.seed);
    const double mix_total = cfg.mix_sn + cfg.mix_sw + cfg.mix_mn + cfg.mix_mw;
    const Rng base(cfg.seed);

    for (int n = 0; n < cfg.num_studies; ++n) {
        char idbuf[32];
        std::snprintf(idbuf, sizeof(idbuf), "%s%06d", cfg.id_prefix.c_str(), n);
        const std::string id = idbuf;
        Rng rng = base.fork("study-" + id);

        Study st;
        st.input.id = id;
        st.input.split = cfg.split;

        const double mr = rng.uniform() * mix_total;
        if (mr < cfg.mix_sn) st.input.scenario = Scenario::sn;
        else if (mr < cfg.mix_sn + cfg.mix_sw) st.input.scenario = Scenario::sw;
        else if (mr < cfg.mix_sn + cfg.mix_sw + cfg.mix_mn) st.input.scenario = Scenario::mn;
        else st.input.scenario = Scenario::mw;
        const Scenario sc = st.input.scenario;

        TransitionRecord trans;
        trans.t.fill(Transition::none);
        if (has_prior(sc)) {
            StatusVector prior = sample_status(rng);
            st.prior = prior;
            st.current = transition_status(prior, rng, trans);
        } else {
            st.current = sample_status(rng);
        }

        // grids
        st.input.frontal = render_grid(st.current, false, cfg.grid, cfg.grid_dim, cfg.noise_sd,
                                       rng, cfg.seed);
        if (has_lateral(sc))
            st.input.lateral = render_grid(st.current, true, cfg.grid, cfg.grid_dim, cfg.noise_sd,
                                           rng, cfg.seed);

        // prior report input
        if (has_prior(sc)) {
            Rng prng = rng.fork("prior-report");
            st.input.prior_report = clean_report_for_status(*st.prior, prng);
        }

        // indication / history
        int first_pos = 0;
        for (int c = 0; c < kNumConditions; ++c)
            if (st.current[static_cast<size_t>(c)] == CondStatus::positive) {
                first_pos = c;
                break;
            }
        if (rng.bernoulli(cfg.indication_rate))
            st.input.indication =
                "indication : " + symptom_words()[static_cast<size_t>(first_pos % 5)] + " .";
        if (rng.bernoulli(cfg.history_rate))
            st.input.history =
                "history : chronic " + symptom_words()[static_cast<size_t>((first_pos + 2) % 5)] + " .";

        // dirty prior-comparison style decision (sn/mn only; sw/mw carry
        // grounded comparisons instead)
        bool pc_eligible = false;
        for (int c = 0; c < kCommonConditions; ++c)
            if (st.current[static_cast<size_t>(c)] == CondStatus::positive) pc_eligible = true;
        bool inject_pc = false;
        if (!has_prior(sc) && cfg.rate_pc > 0.0 && pc_eligible)
            inject_pc = rng.bernoulli(std::min(1.0, cfg.rate_pc / p_eligible));

        // findings
        std::vector<SentencePlan> findings;
        bool used_view_natural = false;
        const bool want_view_natural = has_lateral(sc) && rng.bernoulli(cfg.natural_view);
        for (int c = 0; c < kNumConditions; ++c) {
            const auto s = st.current[static_cast<size_t>(c)];
            if (s == CondStatus::positive) {
                std::string sent;
                const auto tr = trans.t[static_cast<size_t>(c)];
                if (has_prior(sc) && tr != Transition::none && rng.bernoulli(cfg.natural_pc)) {
                    // grounded comparison phrasing
                    if (tr == Transition::stable)
                        sent = sentence_text(rng.bernoulli(0.6) ? Family::pc_again
                                                                : Family::pc_stable_cmp, c);
                    else if (tr == Transition::improved)
                        sent = sentence_text(Family::pc_improved, c);
                    else
                        sent = sentence_text(Family::pc_new, c);
                } else if (inject_pc && c < kCommonConditions) {
                    sent = sentence_text(rng.bernoulli(0.7) ? Family::pc_again
                                                            : Family::pc_stable_cmp, c);
                    st.injected.pc = true;
                } else if (want_view_natural && !used_view_natural) {
                    sent = sentence_text(Family::view_on_lateral, c);
                    used_view_natural = true;
                } else {
                    sent = plain_positive(c, rng);
                }
                findings.push_back({sent});
            } else if (s == CondStatus::uncertain) {
                findings.push_back({plain_uncertain(c, rng)});
            } else if (s == CondStatus::negated) {
                findings.push_back({sentence_text(rng.bernoulli(0.5) ? Family::neg_no_evidence
                                                                     : Family::neg_there_no, c)});
            }
        }
        if (has_prior(sc) && rng.bernoulli(0.2)) {
            // resolved findings get a grounded mention
            for (int c = 0; c < kNumConditions; ++c)
                if (trans.t[static_cast<size_t>(c)] == Transition::resolved) {
                    findings.push_back({sentence_text(Family::pc_resolved, c)});
                    break;
                }
        }
        if (rng.bernoulli(0.5)) findings.push_back({sentence_text(Family::clean_lungs)});
        if (rng.bernoulli(0.3)) findings.push_back({sentence_text(Family::clean_heart)});
        if (rng.bernoulli(cfg.clean_reco_rate)) findings.push_back({sentence_text(Family::reco)});

        // impression
        std::vector<SentencePlan> impression;
        for (int c = 0; c < kNumConditions; ++c) {
            const auto s = st.current[static_cast<size_t>(c)];
            if (s == CondStatus::positive) impression.push_back({sentence_text(Family::pos_present, c), true});
            else if (s == CondStatus::uncertain)
                impression.push_back({sentence_text(Family::unc_may, c), true});
        }
        if (impression.empty()) impression.push_back({sentence_text(Family::impr_none), true});

        // forbidden-category injections (beyond the PC styling above)
        auto positives = [&]() {
            std::vector<int> out;
            for (int c = 0; c < kNumConditions; ++c)
                if (st.current[static_cast<size_t>(c)] == CondStatus::positive) out.push_back(c);
            return out;
        }();
        auto inject = [&](const std::string& text) {
            if (rng.bernoulli(cfg.impression_injection_frac)) impression.push_back({text, true});
            else findings.push_back({text});
        };
        if (cfg.rate_pp > 0.0 && rng.bernoulli(cfg.rate_pp)) {
            const double r = rng.uniform();
            std::string text;
            if (r < 0.34) text = sentence_text(Family::pp_status_post);
            else if (r < 0.67) {
                // sometimes a condition mentioned nowhere else, so deleting the
                // sentence genuinely changes impression labels
                int c;
                if (rng.bernoulli(0.3)) {
                    std::vector<int> unmentioned;
                    for (int k = 0; k < kNumConditions; ++k)
                        if (st.current[static_cast<size_t>(k)] == CondStatus::absent) unmentioned.push_back(k);
                    c = unmentioned.empty() ? positives[0]
                                            : unmentioned[static_cast<size_t>(rng.uniform_int(
                                                  static_cast<int>(unmentioned.size())))];
                } else {
                    c = positives[static_cast<size_t>(rng.uniform_int(static_cast<int>(positives.size())))];
                }
                text = sentence_text(Family::pp_prior_ct, c);
            } else {
                text = sentence_text(Family::pp_catheter);
            }
            inject(text);
            st.injected.pp = true;
        }
        if (!has_lateral(sc) && cfg.rate_view > 0.0 && rng.bernoulli(cfg.rate_view)) {
            const double r = rng.uniform();
            std::string text;
            if (r < 0.4)
                text = sentence_text(Family::view_on_lateral,
                                     positives[static_cast<size_t>(rng.uniform_int(
                                         static_cast<int>(positives.size())))]);
            else if (r < 0.8)
                text = sentence_text(Family::view_confirms,
                                     positives[static_cast<size_t>(rng.uniform_int(
                                         static_cast<int>(positives.size())))]);
            else
                text = sentence_text(Family::view_obtained);
            findings.push_back({text});
            st.injected.view = true;
        }
        if (cfg.rate_comm > 0.0 && rng.bernoulli(cfg.rate_comm)) {
            const double r = rng.uniform();
            std::string text = r < 0.34 ? sentence_text(Family::comm_communicated)
                            : r < 0.67 ? sentence_text(Family::comm_discussed)
                                       : sentence_text(Family::comm_notified);
            inject(text);
            st.injected.comm = true;
        }

        st.report = ReportDoc::from_text(vocab, render_report_text(findings, impression));
        annotate(st.report);
        st.input.validate();
        corpus.studies.push_back(std::move(st));
    }
    return corpus;
}

}  // namespace rg4::synth
