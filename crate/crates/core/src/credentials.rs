use argon2::password_hash::rand_core::OsRng;
use argon2::password_hash::{PasswordHash, PasswordHasher, PasswordVerifier, SaltString};
use argon2::{Algorithm, Argon2, Params, Version};

/// One-way salted password digests.
pub trait CredentialHasher: Send + Sync {
    fn digest(&self, password: &str) -> String;
    fn verify(&self, password: &str, digest: &str) -> bool;
}

/// Argon2id digests in PHC string format.
#[derive(Debug, Clone)]
pub struct Argon2Hasher {
    params: Params,
}

impl Argon2Hasher {
    pub fn new() -> Self {
        Argon2Hasher { params: Params::default() }
    }

    /// Minimal-cost parameters for simulations and tests.
    pub fn low_cost() -> Self {
        Argon2Hasher { params: Params::new(256, 1, 1, None).expect("valid argon2 params") }
    }

    fn engine(&self) -> Argon2<'static> {
        Argon2::new(Algorithm::Argon2id, Version::V0x13, self.params.clone())
    }
}

impl Default for Argon2Hasher {
    fn default() -> Self {
        Self::new()
    }
}

impl CredentialHasher for Argon2Hasher {
    fn digest(&self, password: &str) -> String {
        let salt = SaltString::generate(&mut OsRng);
        self.engine()
            .hash_password(password.as_bytes(), &salt)
            .expect("argon2 hashing with valid params")
            .to_string()
    }

    fn verify(&self, password: &str, digest: &str) -> bool {
        // Parameters are read back from the PHC string.
        PasswordHash::new(digest)
            .map(|parsed| Argon2::default().verify_password(password.as_bytes(), &parsed).is_ok())
            .unwrap_or(false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digests_are_salted_and_verifiable() {
        let h = Argon2Hasher::low_cost();
        let a = h.digest("correct horse battery");
        let b = h.digest("correct horse battery");
        assert_ne!(a, b);
        assert!(!a.contains("correct horse"));
        assert!(h.verify("correct horse battery", &a));
        assert!(Argon2Hasher::new().verify("correct horse battery", &b));
        assert!(!h.verify("wrong horse battery", &a));
        assert!(!h.verify("x", "not a phc string"));
    }
}
