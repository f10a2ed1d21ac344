package com.dyn.config;

import com.dyn.legacy.Legacy;
import java.security.MessageDigest;
import javax.crypto.Cipher;

public class Resolver {
    public Cipher qualified() throws Exception {
        return Cipher.getInstance(Config.CIPHER);
    }

    public MessageDigest ambiguous() throws Exception {
        return MessageDigest.getInstance(ALGO);
    }

    public MessageDigest concatenated() throws Exception {
        String family = "SHA-";
        String name = family + "256";
        return MessageDigest.getInstance(name);
    }

    public MessageDigest fromServer() throws Exception {
        return MessageDigest.getInstance(algorithmFromServer());
    }

    public Cipher ternary(boolean legacy) throws Exception {
        String t = legacy ? "DES" : "AES";
        return Cipher.getInstance(t);
    }

    public Cipher reassigned(boolean strong) throws Exception {
        String t = "AES/CBC/PKCS5Padding";
        if (strong) {
            t = "AES/GCM/NoPadding";
        }
        return Cipher.getInstance(t);
    }

    public MessageDigest parameter(String algorithm) throws Exception {
        return MessageDigest.getInstance(algorithm);
    }

    public MessageDigest partial() throws Exception {
        return MessageDigest.getInstance("SHA-" + suffix());
    }

    public MessageDigest qualifiedLegacy() throws Exception {
        return MessageDigest.getInstance(Legacy.ALGO);
    }

    private String algorithmFromServer() {
        return System.getProperty("algo");
    }

    private String suffix() {
        return "1";
    }
}
