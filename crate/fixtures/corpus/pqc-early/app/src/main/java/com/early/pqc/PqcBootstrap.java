package com.early.pqc;

import java.security.KeyPair;
import java.security.KeyPairGenerator;
import java.security.Security;
import org.bouncycastle.pqc.jcajce.provider.BouncyCastlePQCProvider;
import org.bouncycastle.pqc.crypto.crystals.dilithium.DilithiumSigner;

/** Registers the provider before any kyber key is created. */
public class PqcBootstrap {
    public static void install() {
        Security.addProvider(new BouncyCastlePQCProvider());
    }

    public KeyPair kyberKeys() throws Exception {
        KeyPairGenerator kpg = KeyPairGenerator.getInstance("Kyber", "BCPQC");
        return kpg.generateKeyPair();
    }
}
