// Generate a small image with outliers, unmix it, and compare with the truth.
#include <cstdio>

#include "rblu/rblu.hpp"

int main() {
    rblu::Preset p = rblu::preset("desk-I2");
    p.height = 12;
    p.width = 12;
    p.bands = 32;
    const rblu::SyntheticImage img = rblu::generate(p, 11);

    rblu::SamplerConfig cfg;
    cfg.n_mc = 200;
    cfg.n_bi = 80;
    cfg.seed = 3;
    const rblu::Chain chain = rblu::run_chain(img.cube, p.r, cfg);
    const rblu::PosteriorSummary post = rblu::summarize(chain);

    const auto match = rblu::match_endmembers(post.endmembers, img.truth.endmembers);
    const double err = rblu::rnmse(rblu::align_abundances(post.abundances, match), img.truth.abundances);
    const auto conf = rblu::detection_confusion(post.labels.labels(), img.truth.labels);
    std::printf("abundance RNMSE   %.4g\n", err);
    std::printf("mean SAM (rad)    %.4g\n", match.mean_angle());
    std::printf("outlier TPR/FPR   %.3f / %.4f\n", conf.tpr(), conf.fpr());
    std::printf("beta' estimate    (%.3f, %.3f, %.3f)\n", post.beta.beta_N, post.beta.beta_L, post.beta.beta_0);
}
