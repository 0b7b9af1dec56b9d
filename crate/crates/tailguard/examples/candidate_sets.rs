//! Sequential candidate-set construction with quality and diversity gates,
//! using the deterministic mock sampler and scorers.

use tailguard::candidates::{
    cardinality_confidence, generate_candidate_set, mock_human_score, mock_machine_score,
    mock_quality, mock_sampler, rouge_l_text, GenerationConfig,
};

fn main() {
    let config = GenerationConfig { seed: 9, ..GenerationConfig::default() };
    println!(
        "gates: quality < {}, max ROUGE-L <= {}, stop at |set| >= {}, k_max {}",
        config.quality_threshold,
        config.similarity_threshold,
        config.confidence_threshold,
        config.k_max
    );

    for prompt in ["how do rivers freeze", "explain tidal locking", "what is marrow"] {
        let set = generate_candidate_set(
            prompt,
            mock_sampler(config.temperature, config.top_p),
            mock_quality,
            rouge_l_text,
            cardinality_confidence,
            &config,
        );
        println!("\nprompt: {prompt}  ({} accepted)", set.len());
        for text in set.iter().take(4) {
            println!(
                "  machine {:.3}  human {:.3}  {:?}",
                mock_machine_score(text),
                mock_human_score(text),
                text
            );
        }
    }
}
