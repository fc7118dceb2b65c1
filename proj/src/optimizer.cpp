#include "abrnet/optimizer.hpp"

#include <cmath>

namespace abrnet::opt {

void GroupState::apply(const nn::ParamRefs& params) {
    if (m.empty()) {
        m.resize(params.size());
        v.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            m[i].setZero(params[i]->value.rows(), params[i]->value.cols());
            v[i].setZero(params[i]->value.rows(), params[i]->value.cols());
        }
    }
    if (m.size() != params.size()) {
        throw ContractViolation("optimizer state does not match parameter group");
    }

    ++step_count;
    if (settings.kind == Kind::Adam) {
        const double bc1 = 1.0 - std::pow(settings.beta1, static_cast<double>(step_count));
        const double bc2 = 1.0 - std::pow(settings.beta2, static_cast<double>(step_count));
        for (std::size_t i = 0; i < params.size(); ++i) {
            nn::Tensor& p = *params[i];
            m[i] = settings.beta1 * m[i] + (1.0 - settings.beta1) * p.grad;
            v[i] = (settings.beta2 * v[i].array() +
                    (1.0 - settings.beta2) * p.grad.array().square())
                       .matrix();
            p.value.array() -= settings.lr * (m[i].array() / bc1) /
                               ((v[i].array() / bc2).sqrt() + settings.eps);
        }
    } else {
        for (std::size_t i = 0; i < params.size(); ++i) {
            nn::Tensor& p = *params[i];
            m[i] = settings.momentum * m[i] + p.grad;
            p.value -= settings.lr * m[i];
        }
    }
}

Optimizer make_optimizer(const Settings& main, double lr_discriminator) {
    Optimizer opt;
    for (auto& g : opt.groups) g.settings = main;
    Settings disc = main;
    disc.lr = lr_discriminator;
    opt.state(models::Group::D).settings = disc;
    return opt;
}

} // namespace abrnet::opt
