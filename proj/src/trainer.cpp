#include "probembed/trainer.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "binio.hpp"
#include "probembed/rng.hpp"

namespace probembed {

namespace {

constexpr std::uint64_t kStreamImageInit = 11;
constexpr std::uint64_t kStreamTextInit = 12;
constexpr std::uint64_t kStreamShuffle = 13;

void validate_train_config(const TrainConfig& cfg) {
    if (cfg.batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (!(cfg.base_lr > 0.0)) throw std::invalid_argument("TrainConfig: base_lr must be > 0");
    if (cfg.min_lr < 0.0 || cfg.min_lr > cfg.base_lr) {
        throw std::invalid_argument("TrainConfig: min_lr must be in [0, base_lr]");
    }
    if (!(cfg.clip_max_norm > 0.0)) {
        throw std::invalid_argument("TrainConfig: clip_max_norm must be > 0");
    }
    if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0) || !(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0)) {
        throw std::invalid_argument("TrainConfig: moment coefficients must be in [0, 1)");
    }
    if (cfg.embed_dim < 1 || cfg.hidden1 < 1 || cfg.hidden2 < 1) {
        throw std::invalid_argument("TrainConfig: layer sizes must be >= 1");
    }
    if (!(cfg.infonce_temperature > 0.0)) {
        throw std::invalid_argument("TrainConfig: infonce_temperature must be > 0");
    }
}

void append_views(EncoderParams& p, std::vector<ParamView>& out) {
    for (DenseLayer* l : {&p.fc1, &p.fc2, &p.head_mu, &p.head_log_var}) {
        out.push_back({l->weight.data(), l->weight.size()});
        out.push_back({l->bias.data(), l->bias.size()});
    }
}

std::vector<double> matrix_row(const Matrix& m, std::size_t r) {
    return std::vector<double>(m.data.begin() + static_cast<std::ptrdiff_t>(r * m.cols),
                               m.data.begin() + static_cast<std::ptrdiff_t>((r + 1) * m.cols));
}

constexpr double kNormEpsSq = 1e-24;  // keeps cosine finite for zero vectors

}  // namespace

double lr_schedule(std::size_t step, std::size_t total_steps, const TrainConfig& cfg) {
    if (step > total_steps) throw std::invalid_argument("lr_schedule: step out of range");
    if (cfg.schedule == LrSchedule::constant || total_steps == 0) return cfg.base_lr;
    const double t = static_cast<double>(step) / static_cast<double>(total_steps);
    return cfg.min_lr + 0.5 * (cfg.base_lr - cfg.min_lr) * (1.0 + std::cos(std::numbers::pi * t));
}

ModelGrads ModelGrads::zeros_like(const DualEncoderModel& model) {
    ModelGrads g;
    g.image = EncoderParams::zeros_like(model.image);
    g.text = EncoderParams::zeros_like(model.text);
    return g;
}

void ModelGrads::zero() {
    for (EncoderParams* p : {&image, &text}) {
        for (DenseLayer* l : {&p->fc1, &p->fc2, &p->head_mu, &p->head_log_var}) {
            std::fill(l->weight.begin(), l->weight.end(), 0.0);
            std::fill(l->bias.begin(), l->bias.end(), 0.0);
        }
    }
    raw_scale = 0.0;
    offset = 0.0;
}

std::vector<ParamView> param_views(DualEncoderModel& model) {
    std::vector<ParamView> out;
    append_views(model.image, out);
    append_views(model.text, out);
    out.push_back({&model.scalars.raw_scale, 1});
    out.push_back({&model.scalars.offset, 1});
    return out;
}

std::vector<ParamView> param_views(ModelGrads& grads) {
    std::vector<ParamView> out;
    append_views(grads.image, out);
    append_views(grads.text, out);
    out.push_back({&grads.raw_scale, 1});
    out.push_back({&grads.offset, 1});
    return out;
}

std::size_t param_count(const DualEncoderModel& model) {
    std::size_t n = 2;  // scalars
    for (const EncoderParams* p : {&model.image, &model.text}) {
        for (const DenseLayer* l : {&p->fc1, &p->fc2, &p->head_mu, &p->head_log_var}) {
            n += l->weight.size() + l->bias.size();
        }
    }
    return n;
}

TrainerState init_trainer(std::size_t image_input_dim, std::size_t text_input_dim,
                          const TrainConfig& cfg) {
    validate_train_config(cfg);
    TrainerState state;
    Rng img_rng(derive_seed(cfg.seed, kStreamImageInit));
    state.model.image =
        EncoderParams::init(image_input_dim, cfg.hidden1, cfg.hidden2, cfg.embed_dim, img_rng);
    Rng txt_rng(derive_seed(cfg.seed, kStreamTextInit));
    state.model.text =
        EncoderParams::init(text_input_dim, cfg.hidden1, cfg.hidden2, cfg.embed_dim, txt_rng);
    state.model.scalars = MatchScalars{};
    state.opt.m.assign(param_count(state.model), 0.0);
    state.opt.v.assign(param_count(state.model), 0.0);
    state.opt.step = 0;
    return state;
}

double clip_global_norm(std::vector<ParamView>& grads, double max_norm) {
    double sq = 0.0;
    for (const ParamView& view : grads) {
        for (std::size_t i = 0; i < view.size; ++i) sq += view.data[i] * view.data[i];
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const double scale = max_norm / norm;
        for (ParamView& view : grads) {
            for (std::size_t i = 0; i < view.size; ++i) view.data[i] *= scale;
        }
    }
    return norm;
}

void adamw_update(std::vector<ParamView>& params, std::vector<ParamView>& grads, AdamWState& opt,
                  double lr, const TrainConfig& cfg) {
    const std::uint64_t t = opt.step + 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    const double decay = 1.0 - lr * cfg.weight_decay;
    std::size_t k = 0;
    for (std::size_t s = 0; s < params.size(); ++s) {
        double* p = params[s].data;
        const double* g = grads[s].data;
        for (std::size_t i = 0; i < params[s].size; ++i, ++k) {
            opt.m[k] = cfg.beta1 * opt.m[k] + (1.0 - cfg.beta1) * g[i];
            opt.v[k] = cfg.beta2 * opt.v[k] + (1.0 - cfg.beta2) * g[i] * g[i];
            const double mhat = opt.m[k] / bc1;
            const double vhat = opt.v[k] / bc2;
            p[i] = p[i] * decay - lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
        }
    }
    opt.step = t;
}

namespace {

// Cosine-similarity InfoNCE over the mean embeddings, averaged over the
// four view/section pairings. Accumulates d(loss)/d(mu) when requested.
double infonce_batch_loss(const std::vector<Batch*>& img, const std::vector<Batch*>& txt,
                          double temperature, std::vector<Matrix>* d_mu_img,
                          std::vector<Matrix>* d_mu_txt) {
    const std::size_t b = img[0]->size();
    const std::size_t dim = (*img[0])[0].dim();

    auto norms = [&](const Batch& batch) {
        std::vector<double> out(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i) {
            double sq = kNormEpsSq;
            for (double m : batch[i].mu) sq += m * m;
            out[i] = std::sqrt(sq);
        }
        return out;
    };

    double losses[2][2];
    for (std::size_t a = 0; a < 2; ++a) {
        const Batch& u = *img[a];
        const std::vector<double> nu = norms(u);
        for (std::size_t bb = 0; bb < 2; ++bb) {
            const Batch& v = *txt[bb];
            const std::vector<double> nv = norms(v);
            Matrix sims(b, b);
            for (std::size_t i = 0; i < b; ++i) {
                for (std::size_t j = 0; j < b; ++j) {
                    double dot = 0.0;
                    for (std::size_t d = 0; d < dim; ++d) dot += u[i].mu[d] * v[j].mu[d];
                    sims.at(i, j) = dot / (nu[i] * nv[j]);
                }
            }
            if (d_mu_img == nullptr) {
                losses[a][bb] = infonce_loss(sims, temperature);
                continue;
            }
            Matrix d_sims;
            losses[a][bb] = infonce_loss_grad(sims, temperature, d_sims);
            Matrix& gu = (*d_mu_img)[a];
            Matrix& gv = (*d_mu_txt)[bb];
            for (std::size_t i = 0; i < b; ++i) {
                for (std::size_t j = 0; j < b; ++j) {
                    const double ds = 0.25 * d_sims.at(i, j);
                    if (ds == 0.0) continue;
                    const double inv = 1.0 / (nu[i] * nv[j]);
                    const double sim = sims.at(i, j);
                    for (std::size_t d = 0; d < dim; ++d) {
                        gu.at(i, d) += ds * (v[j].mu[d] * inv - sim * u[i].mu[d] / (nu[i] * nu[i]));
                        gv.at(j, d) += ds * (u[i].mu[d] * inv - sim * v[j].mu[d] / (nv[j] * nv[j]));
                    }
                }
            }
        }
    }
    return ((losses[0][0] + losses[0][1]) + (losses[1][0] + losses[1][1])) * 0.25;
}

}  // namespace

LossBreakdown batch_loss(const DualEncoderModel& model, std::span<const SynthStudy> batch,
                         const TrainConfig& cfg, const LossConfig& loss_cfg, ModelGrads* grads) {
    const std::size_t b = batch.size();
    if (b == 0) throw std::invalid_argument("batch_loss: empty batch");

    const bool want_grads = grads != nullptr;
    std::vector<EncoderActivations> cache_v1(b), cache_v2(b), cache_t1(b), cache_t2(b);
    Batch v1(b), v2(b), t1(b), t2(b);
    for (std::size_t i = 0; i < b; ++i) {
        v1[i] = encoder_forward_cached(model.image, batch[i].view1.flattened(), cache_v1[i]);
        v2[i] = encoder_forward_cached(model.image, batch[i].view2.flattened(), cache_v2[i]);
        t1[i] = encoder_forward_cached(model.text, batch[i].sect1, cache_t1[i]);
        t2[i] = encoder_forward_cached(model.text, batch[i].sect2, cache_t2[i]);
    }
    const MatchMatrix labels = MatchMatrix::identity(b);

    if (cfg.objective == Objective::infonce) {
        std::vector<Batch*> img{&v1, &v2}, txt{&t1, &t2};
        LossBreakdown bd;
        if (!want_grads) {
            bd.inter = infonce_batch_loss(img, txt, cfg.infonce_temperature, nullptr, nullptr);
            bd.total = bd.inter;
            return bd;
        }
        const std::size_t dim = v1[0].dim();
        std::vector<Matrix> d_mu_img{Matrix(b, dim), Matrix(b, dim)};
        std::vector<Matrix> d_mu_txt{Matrix(b, dim), Matrix(b, dim)};
        bd.inter = infonce_batch_loss(img, txt, cfg.infonce_temperature, &d_mu_img, &d_mu_txt);
        bd.total = bd.inter;
        const std::vector<double> zero_lv(dim, 0.0);
        for (std::size_t i = 0; i < b; ++i) {
            encoder_backward(model.image, cache_v1[i], matrix_row(d_mu_img[0], i), zero_lv,
                             grads->image);
            encoder_backward(model.image, cache_v2[i], matrix_row(d_mu_img[1], i), zero_lv,
                             grads->image);
            encoder_backward(model.text, cache_t1[i], matrix_row(d_mu_txt[0], i), zero_lv,
                             grads->text);
            encoder_backward(model.text, cache_t2[i], matrix_row(d_mu_txt[1], i), zero_lv,
                             grads->text);
        }
        return bd;
    }

    if (!want_grads) {
        return total_loss(v1, v2, t1, t2, labels, model.scalars, loss_cfg);
    }
    TotalLossGrads tg;
    const LossBreakdown bd =
        total_loss_with_grads(v1, v2, t1, t2, labels, model.scalars, loss_cfg, tg);
    for (std::size_t i = 0; i < b; ++i) {
        encoder_backward(model.image, cache_v1[i], matrix_row(tg.v1.d_mu, i),
                         matrix_row(tg.v1.d_log_var, i), grads->image);
        encoder_backward(model.image, cache_v2[i], matrix_row(tg.v2.d_mu, i),
                         matrix_row(tg.v2.d_log_var, i), grads->image);
        encoder_backward(model.text, cache_t1[i], matrix_row(tg.t1.d_mu, i),
                         matrix_row(tg.t1.d_log_var, i), grads->text);
        encoder_backward(model.text, cache_t2[i], matrix_row(tg.t2.d_mu, i),
                         matrix_row(tg.t2.d_log_var, i), grads->text);
    }
    // chain through softplus: d(raw_scale) = d(scale) * sigmoid(raw_scale)
    grads->raw_scale += tg.d_scale * sigmoid(model.scalars.raw_scale);
    grads->offset += tg.d_offset;
    return bd;
}

LossBreakdown train_step(TrainerState& state, std::span<const SynthStudy> batch,
                         const TrainConfig& cfg, const LossConfig& loss_cfg) {
    ModelGrads grads = ModelGrads::zeros_like(state.model);
    const LossBreakdown bd = batch_loss(state.model, batch, cfg, loss_cfg, &grads);
    if (!std::isfinite(bd.total)) {
        std::ostringstream msg;
        msg << "train_step: non-finite loss at step " << state.opt.step << " (inter=" << bd.inter
            << " intra_img=" << bd.intra_img << " intra_txt=" << bd.intra_txt
            << " kl_img=" << bd.kl_img << " kl_txt=" << bd.kl_txt << ")";
        throw std::runtime_error(msg.str());
    }
    std::vector<ParamView> gv = param_views(grads);
    clip_global_norm(gv, cfg.clip_max_norm);
    const std::size_t total = state.total_steps > 0 ? state.total_steps : state.opt.step + 1;
    const double lr = lr_schedule(std::min<std::size_t>(state.opt.step, total), total, cfg);
    std::vector<ParamView> pv = param_views(state.model);
    adamw_update(pv, gv, state.opt, lr, cfg);
    return bd;
}

FitResult fit(const std::vector<SynthStudy>& dataset, const TrainConfig& cfg,
              const LossConfig& loss_cfg) {
    if (dataset.empty()) throw std::invalid_argument("fit: dataset must be non-empty");
    FitResult result;
    result.state = init_trainer(dataset.front().view1.values.size(), dataset.front().sect1.size(),
                                cfg);
    const std::size_t n = dataset.size();
    const std::size_t bs = std::min(cfg.batch_size, n);
    const std::size_t steps_per_epoch = (n + bs - 1) / bs;
    result.state.total_steps = cfg.epochs * steps_per_epoch;

    Rng shuffle_rng(derive_seed(cfg.seed, kStreamShuffle));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<SynthStudy> scratch;
    scratch.reserve(bs);

    result.history.reserve(cfg.epochs);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        LossBreakdown sum;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < n; start += bs) {
            const std::size_t stop = std::min(n, start + bs);
            scratch.clear();
            for (std::size_t k = start; k < stop; ++k) scratch.push_back(dataset[order[k]]);
            const LossBreakdown bd = train_step(result.state, scratch, cfg, loss_cfg);
            sum.inter += bd.inter;
            sum.intra_img += bd.intra_img;
            sum.intra_txt += bd.intra_txt;
            sum.kl_img += bd.kl_img;
            sum.kl_txt += bd.kl_txt;
            sum.total += bd.total;
            ++batches;
        }
        const double inv = 1.0 / static_cast<double>(batches);
        LossBreakdown mean{sum.inter * inv,   sum.intra_img * inv, sum.intra_txt * inv,
                           sum.kl_img * inv,  sum.kl_txt * inv,    sum.total * inv};
        result.history.push_back(mean);
    }
    return result;
}

std::pair<EmbeddingStore, EmbeddingStore> encode_corpus(const DualEncoderModel& model,
                                                        const std::vector<SynthStudy>& dataset) {
    EmbeddingStore images, texts;
    for (const SynthStudy& st : dataset) {
        images.append(st.id, encoder_forward(model.image, st.view1.flattened()));
        texts.append(st.id, encoder_forward(model.text, st.sect1));
    }
    return {std::move(images), std::move(texts)};
}

namespace {
constexpr char kCheckpointMagic[4] = {'P', 'G', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;

void write_encoder_dims(std::ostream& out, const EncoderParams& p) {
    binio::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(p.fc1.in_dim));
    binio::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(p.fc1.out_dim));
    binio::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(p.fc2.out_dim));
    binio::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(p.head_mu.out_dim));
}
}  // namespace

void save_checkpoint(const TrainerState& state, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
    try {
        binio::write_bytes(out, kCheckpointMagic, 4);
        binio::write_pod<std::uint32_t>(out, kCheckpointVersion);
        write_encoder_dims(out, state.model.image);
        write_encoder_dims(out, state.model.text);
        binio::write_pod<std::uint64_t>(out, state.total_steps);
        binio::write_pod<std::uint64_t>(out, state.opt.step);
        DualEncoderModel& model = const_cast<DualEncoderModel&>(state.model);
        std::vector<ParamView> views = param_views(model);
        std::uint64_t total = 0;
        for (const ParamView& v : views) total += v.size;
        binio::write_pod<std::uint64_t>(out, total);
        for (const ParamView& v : views) binio::write_bytes(out, v.data, v.size * sizeof(double));
        binio::write_bytes(out, state.opt.m.data(), state.opt.m.size() * sizeof(double));
        binio::write_bytes(out, state.opt.v.data(), state.opt.v.size() * sizeof(double));
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(std::string(e.what()) + " [" + path + "]");
    }
}

TrainerState load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
    try {
        char magic[4];
        binio::read_bytes(in, magic, 4);
        if (std::string(magic, 4) != std::string(kCheckpointMagic, 4)) {
            throw std::runtime_error("bad magic, not a checkpoint");
        }
        const auto version = binio::read_pod<std::uint32_t>(in);
        if (version != kCheckpointVersion) {
            throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
        }
        auto read_dims = [&](std::uint32_t d[4]) {
            for (int i = 0; i < 4; ++i) d[i] = binio::read_pod<std::uint32_t>(in);
        };
        std::uint32_t img[4], txt[4];
        read_dims(img);
        read_dims(txt);
        TrainerState state;
        Rng dummy(0);
        state.model.image = EncoderParams::init(img[0], img[1], img[2], img[3], dummy);
        state.model.text = EncoderParams::init(txt[0], txt[1], txt[2], txt[3], dummy);
        state.total_steps = binio::read_pod<std::uint64_t>(in);
        state.opt.step = binio::read_pod<std::uint64_t>(in);
        const auto total = binio::read_pod<std::uint64_t>(in);
        if (total != param_count(state.model)) {
            throw std::runtime_error("checkpoint parameter count mismatch");
        }
        std::vector<ParamView> views = param_views(state.model);
        for (ParamView& v : views) binio::read_bytes(in, v.data, v.size * sizeof(double));
        state.opt.m.resize(total);
        state.opt.v.resize(total);
        binio::read_bytes(in, state.opt.m.data(), total * sizeof(double));
        binio::read_bytes(in, state.opt.v.data(), total * sizeof(double));
        return state;
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(std::string(e.what()) + " [" + path + "]");
    }
}

GradCheckResult gradient_check(TrainerState& state, std::span<const SynthStudy> batch,
                               const TrainConfig& cfg, const LossConfig& loss_cfg,
                               double step_size) {
    ModelGrads grads = ModelGrads::zeros_like(state.model);
    batch_loss(state.model, batch, cfg, loss_cfg, &grads);
    std::vector<ParamView> pv = param_views(state.model);
    std::vector<ParamView> gv = param_views(grads);

    GradCheckResult result;
    for (std::size_t s = 0; s < pv.size(); ++s) {
        for (std::size_t i = 0; i < pv[s].size; ++i) {
            double& p = pv[s].data[i];
            const double saved = p;
            p = saved + step_size;
            const double up = batch_loss(state.model, batch, cfg, loss_cfg, nullptr).total;
            p = saved - step_size;
            const double down = batch_loss(state.model, batch, cfg, loss_cfg, nullptr).total;
            p = saved;
            const double numeric = (up - down) / (2.0 * step_size);
            const double analytic = gv[s].data[i];
            const double denom = std::max({1.0, std::fabs(numeric), std::fabs(analytic)});
            result.max_rel_error = std::max(result.max_rel_error,
                                            std::fabs(numeric - analytic) / denom);
            ++result.params_checked;
        }
    }
    return result;
}

}  // namespace probembed
