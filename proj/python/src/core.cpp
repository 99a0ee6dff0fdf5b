#include "dermflow/evaluation.hpp"
#include "dermflow/features.hpp"
#include "dermflow/image_io.hpp"
#include "dermflow/prompts.hpp"
#include "dermflow/workflow.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

namespace py = pybind11;
using namespace dermflow;

namespace {

using ImageArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

py::array_t<std::uint8_t> to_array(const imaging::RasterImage& img) {
    py::array_t<std::uint8_t> out({img.height(), img.width(), 3});
    static_assert(sizeof(imaging::Rgb) == 3);
    std::memcpy(out.mutable_data(), img.pixels().data(), img.pixels().size() * 3);
    return out;
}

imaging::RasterImage from_array(const ImageArray& a) {
    if (a.ndim() != 3 || a.shape(2) != 3) {
        throw InvalidArgument("image must be an (height, width, 3) uint8 array");
    }
    imaging::RasterImage img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
    std::memcpy(img.pixels().data(), a.data(), img.pixels().size() * 3);
    return img;
}

py::array_t<bool> mask_array(const imaging::BinaryMask& m) {
    py::array_t<bool> out({m.height(), m.width()});
    auto* dst = out.mutable_data();
    const auto bits = m.bits();
    for (std::size_t i = 0; i < bits.size(); ++i) {
        dst[i] = bits[i] != 0;
    }
    return out;
}

std::vector<std::uint8_t> as_bytes(const py::bytes& b) {
    const std::string s = b;
    return {s.begin(), s.end()};
}

py::bytes to_bytes(std::span<const std::uint8_t> v) {
    return py::bytes(reinterpret_cast<const char*>(v.data()), v.size());
}

segmentation::GrabCutParams grabcut_params(int components, int iterations, double gamma, int connectivity) {
    segmentation::GrabCutParams p;
    p.gmm_components = components;
    p.iterations = iterations;
    p.gamma = gamma;
    p.connectivity = connectivity;
    p.validate();
    return p;
}

py::dict features_dict(const features::LesionFeatures& f) {
    py::dict d;
    d["area"] = f.area;
    d["perimeter"] = f.perimeter;
    d["circularity"] = f.circularity;
    d["asymmetry_major"] = f.asymmetry_major;
    d["asymmetry_minor"] = f.asymmetry_minor;
    d["asymmetry_avg"] = f.asymmetry_avg;
    d["color_std"] = py::make_tuple(f.color_std.r, f.color_std.g, f.color_std.b);
    return d;
}

py::dict assessment_dict(const prompts::ParsedAssessment& a) {
    static constexpr const char* kStatus[] = {"missing", "not_applicable", "populated"};
    py::dict abcde;
    abcde["status"] = kStatus[static_cast<int>(a.abcde.status)];
    abcde["asymmetry"] = a.abcde.asymmetry;
    abcde["border"] = a.abcde.border;
    abcde["color"] = a.abcde.color;
    abcde["diameter"] = a.abcde.diameter;
    abcde["evolution"] = a.abcde.evolution;
    py::dict d;
    d["visual_description"] = a.visual_description;
    d["feature_presence"] = a.feature_presence;
    d["feature_localization"] = a.feature_localization;
    d["abcde"] = abcde;
    d["diagnoses"] = a.diagnoses;
    d["final_diagnosis"] = a.final_diagnosis ? py::object(py::str(*a.final_diagnosis)) : py::object(py::none());
    d["clinical_features"] = a.clinical_features;
    d["issues"] = a.issues;
    d["compliant"] = a.compliant();
    d["path"] = std::string(prompts::to_string(prompts::classify_path(a).path));
    return d;
}

std::vector<providers::TokenVector> token_vectors(const std::vector<std::vector<double>>& rows) {
    std::vector<providers::TokenVector> out;
    for (const auto& r : rows) {
        out.push_back({"", r});
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "dermflow native core";

    static py::exception<Error> base_exc(m, "DermflowError", PyExc_RuntimeError);
    static py::exception<InvalidArgument> invalid_exc(m, "InvalidArgument", PyExc_ValueError);
    static py::exception<UnsupportedFormat> format_exc(m, "UnsupportedFormat", base_exc.ptr());
    static py::exception<NoLesionError> lesion_exc(m, "NoLesionError", base_exc.ptr());
    static py::exception<ProviderError> provider_exc(m, "ProviderError", base_exc.ptr());
    static py::exception<IllegalTransition> transition_exc(m, "IllegalTransition", base_exc.ptr());
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) {
                std::rethrow_exception(p);
            }
        } catch (const InvalidArgument& e) {
            py::set_error(invalid_exc, e.what());
        } catch (const UnsupportedFormat& e) {
            py::set_error(format_exc, e.what());
        } catch (const NoLesionError& e) {
            py::set_error(lesion_exc, e.what());
        } catch (const DegenerateHistogram& e) {
            py::set_error(lesion_exc, e.what());
        } catch (const UninitializedTrimap& e) {
            py::set_error(lesion_exc, e.what());
        } catch (const DegenerateMask& e) {
            py::set_error(lesion_exc, e.what());
        } catch (const ProviderError& e) {
            py::set_error(provider_exc, e.what());
        } catch (const IllegalTransition& e) {
            py::set_error(transition_exc, e.what());
        } catch (const Error& e) {
            py::set_error(base_exc, e.what());
        }
    });

    m.def("decode_image", [](const py::bytes& b) { return to_array(imaging::decode_image(as_bytes(b))); }, py::arg("data"),
          "Decode PNG or JPEG bytes into an (h, w, 3) uint8 array.");
    m.def("load_image", [](const std::filesystem::path& p) { return to_array(imaging::load_image(p)); }, py::arg("path"));
    m.def("encode_png", [](const ImageArray& a) { return to_bytes(imaging::encode_png(from_array(a))); }, py::arg("image"));

    m.def(
        "segment_lesion",
        [](const ImageArray& a, int components, int iterations, double gamma, int connectivity) {
            const auto img = from_array(a);
            py::gil_scoped_release release;
            auto seg = segmentation::segment_lesion(img, grabcut_params(components, iterations, gamma, connectivity));
            py::gil_scoped_acquire acquire;
            return py::make_tuple(mask_array(seg.lesion_mask), seg.otsu.threshold);
        },
        py::arg("image"), py::arg("gmm_components") = 5, py::arg("iterations") = 5, py::arg("gamma") = 50.0, py::arg("connectivity") = 8,
        "Lesion mask and the Otsu threshold used to seed it.");

    m.def(
        "analyze_lesion",
        [](const ImageArray& a, int components, int iterations, double gamma, int connectivity) {
            const auto img = from_array(a);
            features::LesionAnalysis r;
            {
                py::gil_scoped_release release;
                r = features::analyze_lesion(img, grabcut_params(components, iterations, gamma, connectivity));
            }
            py::dict plots;
            for (const auto& p : r.report.plots) {
                plots[py::str(p.name)] = to_bytes(p.png);
            }
            py::dict d;
            d["features"] = features_dict(r.report.features);
            d["report"] = r.report.text;
            d["mask"] = mask_array(r.segmentation.lesion_mask);
            d["plots"] = plots;
            return d;
        },
        py::arg("image"), py::arg("gmm_components") = 5, py::arg("iterations") = 5, py::arg("gamma") = 50.0, py::arg("connectivity") = 8);

    m.def("parse_technical_report", [](const std::string& text) { return features_dict(features::parse_technical_report(text)); },
          py::arg("text"));
    m.def("circularity", &features::circularity, py::arg("area"), py::arg("perimeter"));

    m.def("lesion_prompt", &prompts::build_lesion_prompt);
    m.def("condition_prompt", &prompts::build_condition_prompt);
    m.def("lesion_labels", &prompts::lesion_labels);
    m.def(
        "parse_assessment",
        [](const std::string& text, bool lesion_compliance) {
            auto a = prompts::parse_assessment(text);
            if (lesion_compliance) {
                prompts::check_lesion_compliance(a);
            }
            return assessment_dict(a);
        },
        py::arg("text"), py::arg("lesion_compliance") = false);
    m.def(
        "parse_send2lab",
        [](const std::string& text) {
            const auto d = workflow::parse_send2lab(text);
            py::dict out;
            out["required"] = d.required;
            out["rationale"] = d.rationale;
            out["from_referral_line"] = d.from_referral_line;
            return out;
        },
        py::arg("xai_report"));

    m.def(
        "cosine_similarity", [](const std::vector<double>& a, const std::vector<double>& b) { return evaluation::cosine_similarity(a, b); },
        py::arg("a"), py::arg("b"));
    m.def(
        "bert_score",
        [](const std::vector<std::vector<double>>& p, const std::vector<std::vector<double>>& h) {
            const auto s = evaluation::bert_score(token_vectors(p), token_vectors(h));
            return py::make_tuple(s.precision, s.recall, s.f1);
        },
        py::arg("premise_tokens"), py::arg("hypothesis_tokens"), "Greedy-matching (precision, recall, f1).");
    m.def(
        "nli_label",
        [](double contradiction, double neutral, double entailment) {
            const auto r = evaluation::nli_label({contradiction, neutral, entailment});
            return py::make_tuple(std::string(evaluation::to_string(r.label)), r.probability);
        },
        py::arg("contradiction"), py::arg("neutral"), py::arg("entailment"));
    m.def(
        "weighted_row",
        [](double context, double entity, double w_context, double w_entities) {
            evaluation::Weights w{w_context, w_entities};
            w.validate();
            return evaluation::weighted_row(context, entity, w);
        },
        py::arg("context"), py::arg("entity"), py::arg("context_weight") = 1.5, py::arg("entity_weight") = 1.0);

    m.def(
        "_evaluate",
        [](const std::filesystem::path& corpus_dir, std::optional<std::filesystem::path> reviews_path,
           std::optional<std::filesystem::path> fixtures, int workers, double w_context, double w_entities) {
            py::gil_scoped_release release;
            const auto corpus = evaluation::load_corpus(corpus_dir);
            if (!corpus.errors.empty()) {
                throw InvalidArgument(corpus.errors.front().document + ": " + corpus.errors.front().message + " (" +
                                      std::to_string(corpus.errors.size()) + " corpus error(s))");
            }
            std::vector<evaluation::ExpertReview> reviews;
            if (reviews_path) {
                auto ingest = evaluation::ingest_expert_reviews(*reviews_path);
                if (!ingest.errors.empty()) {
                    throw InvalidArgument("reviews line " + std::to_string(ingest.errors.front().line) + ": " + ingest.errors.front().message);
                }
                reviews = std::move(ingest.reviews);
            }
            const auto ps = providers::MockProviders::load(fixtures.value_or(corpus_dir / "providers")).provider_set();
            evaluation::RunOptions options;
            options.workers = workers;
            options.weights = {w_context, w_entities};
            const auto report = evaluation::run_evaluation(corpus.cases, reviews, ps, options);
            return std::pair{evaluation::report_to_json(report), evaluation::render_table(report)};
        },
        py::arg("corpus"), py::arg("reviews") = py::none(), py::arg("fixtures") = py::none(), py::arg("workers") = 4,
        py::arg("context_weight") = 1.5, py::arg("entity_weight") = 1.0);

    m.def(
        "_run_case",
        [](const py::bytes& image, const std::filesystem::path& fixtures) {
            auto bytes = as_bytes(image);
            py::gil_scoped_release release;
            workflow::Case c = workflow::Case::from_bytes(std::move(bytes));
            workflow::run_full(c, providers::MockProviders::load(fixtures).provider_set());
            return workflow::case_to_json(c, false);
        },
        py::arg("image"), py::arg("fixtures"));
}
